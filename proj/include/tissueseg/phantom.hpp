#pragma once

#include <cstdint>

#include "tissueseg/volume.hpp"

namespace tseg {

/// Synthetic head phantom: a WM core inside a GM shell inside a CSF shell,
/// background outside. Shell boundaries are gently perturbed per seed and
/// the centre is jittered, so different seeds give different voxel data with
/// nearly equal class volumes.
///
/// Single modality (T1w-like): background 0, CSF 1, GM 2, WM 3.
///
/// Two modalities: WM is bright in channel 0 and dark in channel 1, while GM
/// and CSF share an identical two-level intensity mixture in each channel.
/// A hidden per-voxel coin flips both channels together in GM and in
/// opposition in CSF, so the GM/CSF pair is separable only from the joint
/// (channel 0, channel 1) value. The GM/CSF interface is additionally made
/// irregular so shell position alone does not give the class away.
///
/// Gaussian noise with `noise_sigma` is added to every voxel of every
/// channel. The brain mask is the union of the three tissue classes.
///
/// Requires every axis >= 32, noise_sigma >= 0 and modality_count in {1,2}.
Case generate_phantom(std::uint64_t seed, const Vec3i& dims, double noise_sigma, int modality_count = 1);

inline constexpr int kMinPhantomExtent = 32;

} // namespace tseg
