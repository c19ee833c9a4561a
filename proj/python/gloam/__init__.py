# SPDX-License-Identifier: Apache-2.0
"""GICP LiDAR odometry with learned covariance regularization."""

from gloam._core import (
    MLP_PARAM_COUNT,
    __version__,
    classical_descriptors,
    export_ply,
    load_weights,
    read_kitti_bin,
    read_kitti_poses,
    register_pair,
    rte,
    run_odometry,
    save_weights,
    set_thread_count,
    synth_corridor,
    train,
    voxel_downsample,
    weights_random,
    write_kitti_bin,
    write_kitti_poses,
)

__all__ = [
    "MLP_PARAM_COUNT",
    "__version__",
    "classical_descriptors",
    "export_ply",
    "load_weights",
    "read_kitti_bin",
    "read_kitti_poses",
    "register_pair",
    "rte",
    "run_odometry",
    "save_weights",
    "set_thread_count",
    "synth_corridor",
    "train",
    "voxel_downsample",
    "weights_random",
    "write_kitti_bin",
    "write_kitti_poses",
]
