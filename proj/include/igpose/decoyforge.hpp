// SPDX-License-Identifier: Apache-2.0
//
// Synthetic fixtures: small two-partner complexes and rigid-body decoys of
// them labeled by perturbation size, with a smooth quality proxy.

#ifndef IGPOSE_DECOYFORGE_HPP_
#define IGPOSE_DECOYFORGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "igpose/manifest.hpp"
#include "igpose/structio.hpp"

namespace igpose::decoyforge {

using structio::Complex;

enum class Partner { ig, ag };

// x -> R x + t on every atom of one partner.
struct Perturbation {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Partner applied_to = Partner::ag;

  void validate() const;
};

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle);

Complex rigid_transform(const Complex& c, const Perturbation& p);

// RMS displacement of one partner's CA atoms between two poses of the same
// complex.
double ca_rms_displacement(const Complex& before, const Complex& after, Partner partner);

inline constexpr double kQualityScale = 8.5;
double quality_from_lrms(double lrms);

inline constexpr double kNearMaxShift = 1.0;   // Angstrom
inline constexpr double kNearMaxAngle = 5.0;   // degrees
inline constexpr double kFarMinShift = 8.0;
inline constexpr double kFarMaxShift = 30.0;
inline constexpr double kFarMinAngle = 60.0;

struct Decoy {
  Complex complex;
  Perturbation perturbation;
  int label = 0;
  double lrms = 0;
  double quality = 1;
};

// Near decoys (label 1) shift the antigen by at most 1 A and rotate it by at
// most 5 degrees about its CA centroid; far decoys (label 0) shift it by
// 8-30 A or rotate it by 60-180 degrees, keeping at least one inter-partner
// residue pair within 10 A, and always displace it further than any near decoy.
std::vector<Decoy> forge_decoys(const Complex& c, int n_near, int n_far, std::uint64_t seed);

// Upper bound on a near decoy's CA RMS displacement for this complex.
double near_lrms_bound(const Complex& c, Partner partner = Partner::ag);

// Two jittered planar patches: Ig chain "H" (heavy) at z = +3 and antigen
// chain "A" at z = -3, three atoms (N, CA, C) per residue. The middle third of
// the Ig chain is marked CDR.
Complex micro_complex(int n_ig, int n_ag, std::uint64_t seed);

// CDR flags of a complex as a sidecar annotation.
structio::CdrAnnotation cdr_annotation_of(const Complex& c);

struct FixtureConfig {
  int complexes = 5;
  int n_ig = 8;
  int n_ag = 8;
  int n_near = 8;
  int n_far = 8;
};

// Writes structures/, cdr/ and manifest.jsonl under `dir`; every complex is
// its own cluster and splits are assigned by cluster (6:2:2).
std::vector<SampleRecord> write_fixture(const std::string& dir, const FixtureConfig& cfg,
                                        std::uint64_t seed);

} // namespace igpose::decoyforge

#endif
