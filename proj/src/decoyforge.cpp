// SPDX-License-Identifier: Apache-2.0

#include "igpose/decoyforge.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "igpose/error.hpp"
#include "igpose/evalkit.hpp"
#include "igpose/rng.hpp"

namespace igpose::decoyforge {

namespace {

using structio::ChainRole;
using structio::Residue;

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kContact = 10.0;
constexpr double kGridSpacing = 3.8;
constexpr double kPlaneOffset = 3.0;

bool in_partner(const structio::Chain& ch, Partner p) {
  if (!ch.role)
    fail(ErrorKind::validation, "chain " + ch.id + " has no role");
  return structio::is_ig(*ch.role) == (p == Partner::ig);
}

std::vector<Eigen::Vector3d> partner_cas(const Complex& c, Partner p) {
  std::vector<Eigen::Vector3d> out;
  for (const auto& ch : c.chains)
    if (in_partner(ch, p))
      for (const auto& r : ch.residues)
        if (const auto* a = r.ca())
          out.push_back(a->pos);
  return out;
}

Eigen::Vector3d centroid(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d s = Eigen::Vector3d::Zero();
  for (const auto& p : pts)
    s += p;
  return s / double(pts.size());
}

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Eigen::Vector3d v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12)
      return v / len;
  }
}

double min_inter_distance(const Complex& c) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : c.chains)
    for (const auto& b : c.chains) {
      if (!in_partner(a, Partner::ig) || !in_partner(b, Partner::ag))
        continue;
      for (const auto& ra : a.residues)
        for (const auto& rb : b.residues)
          for (const auto& x : ra.atoms)
            for (const auto& y : rb.atoms)
              best = std::min(best, (x.pos - y.pos).norm());
    }
  return best;
}

// Rotation about `center` followed by a shift, expressed as x -> R x + t.
Perturbation about_center(const Eigen::Matrix3d& r, const Eigen::Vector3d& shift,
                          const Eigen::Vector3d& center) {
  Perturbation p;
  p.rotation = r;
  p.translation = center - r * center + shift;
  p.applied_to = Partner::ag;
  return p;
}

Decoy make_decoy(const Complex& c, const Perturbation& p, int label) {
  Decoy d;
  d.perturbation = p;
  d.complex = rigid_transform(c, p);
  d.label = label;
  d.lrms = ca_rms_displacement(c, d.complex, p.applied_to);
  d.quality = quality_from_lrms(d.lrms);
  return d;
}

} // namespace

void Perturbation::validate() const {
  const double orth = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!(orth <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9))
    fail(ErrorKind::validation, "perturbation rotation is not a proper rotation");
  if (!translation.allFinite())
    fail(ErrorKind::validation, "perturbation translation is not finite");
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Complex rigid_transform(const Complex& c, const Perturbation& p) {
  p.validate();
  Complex out = c;
  for (auto& ch : out.chains)
    if (in_partner(ch, p.applied_to))
      for (auto& r : ch.residues)
        for (auto& a : r.atoms)
          a.pos = p.rotation * a.pos + p.translation;
  return out;
}

double ca_rms_displacement(const Complex& before, const Complex& after, Partner partner) {
  const auto a = partner_cas(before, partner);
  const auto b = partner_cas(after, partner);
  if (a.size() != b.size() || a.empty())
    fail(ErrorKind::dimension, "ca_rms_displacement: poses do not share CA atoms");
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i)
    s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s / double(a.size()));
}

double quality_from_lrms(double lrms) {
  const double x = lrms / kQualityScale;
  return 1.0 / (1.0 + x * x);
}

double near_lrms_bound(const Complex& c, Partner partner) {
  const auto cas = partner_cas(c, partner);
  const Eigen::Vector3d m = centroid(cas);
  double r2 = 0;
  for (const auto& x : cas)
    r2 += (x - m).squaredNorm();
  r2 /= double(cas.size());
  const double chord = 2 * std::sin(0.5 * kNearMaxAngle * kDeg);
  return std::sqrt(kNearMaxShift * kNearMaxShift + chord * chord * r2);
}

std::vector<Decoy> forge_decoys(const Complex& c, int n_near, int n_far, std::uint64_t seed) {
  if (n_near < 0 || n_far < 0)
    fail(ErrorKind::config, "forge_decoys: counts must be nonnegative");
  structio::validate_roles(c);
  const Eigen::Vector3d center = centroid(partner_cas(c, Partner::ag));
  const double bound = near_lrms_bound(c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Decoy> out;

  for (int k = 0; k < n_near; ++k) {
    const Eigen::Vector3d shift = random_unit(rng) * (kNearMaxShift * u01(rng));
    const Eigen::Vector3d axis = random_unit(rng);
    const double angle = kNearMaxAngle * kDeg * u01(rng);
    out.push_back(make_decoy(c, about_center(axis_angle(axis, angle), shift, center), 1));
  }

  constexpr int kMaxTries = 200;
  for (int k = 0; k < n_far; ++k) {
    bool done = false;
    for (int attempt = 0; attempt < kMaxTries && !done; ++attempt) {
      // Shifts that lose every contact are common; after half the budget
      // only rotations are drawn.
      const bool rotate = attempt >= kMaxTries / 2 || u01(rng) < 0.5;
      Perturbation p;
      if (rotate) {
        const Eigen::Vector3d axis = random_unit(rng);
        const double angle = (kFarMinAngle + (180.0 - kFarMinAngle) * u01(rng)) * kDeg;
        p = about_center(axis_angle(axis, angle), Eigen::Vector3d::Zero(), center);
      } else {
        const Eigen::Vector3d dir = random_unit(rng);
        const double len = kFarMinShift + (kFarMaxShift - kFarMinShift) * u01(rng);
        p = about_center(Eigen::Matrix3d::Identity(), dir * len, center);
      }
      Decoy d = make_decoy(c, p, 0);
      if (d.lrms > bound && min_inter_distance(d.complex) <= kContact) {
        out.push_back(std::move(d));
        done = true;
      }
    }
    if (!done)
      fail(ErrorKind::data, "forge_decoys: could not place far decoy " + std::to_string(k) +
                                " of " + c.id);
  }
  return out;
}

Complex micro_complex(int n_ig, int n_ag, std::uint64_t seed) {
  if (n_ig < 1 || n_ag < 1)
    fail(ErrorKind::config, "micro_complex: both partners need at least one residue");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  const auto& aa = structio::standard_amino_acids();
  std::uniform_int_distribution<int> pick(0, static_cast<int>(aa.size()) - 1);

  auto make_chain = [&](const std::string& id, ChainRole role, int n, double z) {
    structio::Chain ch;
    ch.id = id;
    ch.role = role;
    const int side = static_cast<int>(std::ceil(std::sqrt(double(n))));
    const double half = 0.5 * double(side - 1);
    for (int k = 0; k < n; ++k) {
      Residue r;
      r.chain_id = id;
      r.seq_index = k + 1;
      r.resname = aa[pick(rng)];
      const double x = (double(k % side) - half) * kGridSpacing + jitter(rng);
      const double y = (double(k / side) - half) * kGridSpacing + jitter(rng);
      const Eigen::Vector3d ca(x, y, z + jitter(rng));
      r.atoms.push_back({"N", "N", ca + Eigen::Vector3d(-1.2, 0.4, 0.2), 1.0, ' '});
      r.atoms.push_back({"CA", "C", ca, 1.0, ' '});
      r.atoms.push_back({"C", "C", ca + Eigen::Vector3d(1.2, -0.4, -0.2), 1.0, ' '});
      ch.residues.push_back(std::move(r));
    }
    return ch;
  };

  Complex c;
  c.id = "micro";
  c.chains.push_back(make_chain("H", ChainRole::heavy, n_ig, kPlaneOffset));
  c.chains.push_back(make_chain("A", ChainRole::antigen, n_ag, -kPlaneOffset));
  auto& ig = c.chains.front().residues;
  const int lo = n_ig / 3;
  const int hi = (2 * n_ig + 2) / 3;
  for (int k = lo; k < hi; ++k)
    ig[k].is_cdr = true;
  return c;
}

structio::CdrAnnotation cdr_annotation_of(const Complex& c) {
  structio::CdrAnnotation ann;
  for (const auto& ch : c.chains) {
    int start = 0;
    bool open = false;
    int prev = 0;
    for (const auto& r : ch.residues) {
      if (r.is_cdr && !open) {
        start = r.seq_index;
        open = true;
      } else if (!r.is_cdr && open) {
        ann[ch.id].push_back({start, prev});
        open = false;
      }
      prev = r.seq_index;
    }
    if (open)
      ann[ch.id].push_back({start, prev});
  }
  return ann;
}

std::vector<SampleRecord> write_fixture(const std::string& dir, const FixtureConfig& cfg,
                                        std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (cfg.complexes < 1)
    fail(ErrorKind::config, "fixture needs at least one complex");
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "structures", ec);
  fs::create_directories(fs::path(dir) / "cdr", ec);
  if (ec)
    fail(ErrorKind::io, "cannot create fixture directory " + dir + ": " + ec.message());

  std::vector<SampleRecord> records;
  for (int i = 0; i < cfg.complexes; ++i) {
    char cid[32];
    std::snprintf(cid, sizeof cid, "cx%02d", i);
    Complex base = micro_complex(cfg.n_ig, cfg.n_ag, derive_seed(seed, "forge-complex", i));
    base.id = cid;
    const std::string cdr_rel = std::string("cdr/") + cid + ".cdr";
    {
      std::ofstream out(fs::path(dir) / cdr_rel);
      if (!out)
        fail(ErrorKind::io, "cannot write " + cdr_rel);
      out << structio::format_cdr_annotation(cdr_annotation_of(base));
    }
    const auto decoys = forge_decoys(base, cfg.n_near, cfg.n_far, derive_seed(seed, "forge", i));
    for (size_t k = 0; k < decoys.size(); ++k) {
      char did[48];
      std::snprintf(did, sizeof did, "%s_d%02zu", cid, k);
      const std::string rel = std::string("structures/") + did + ".pdb";
      Complex dc = decoys[k].complex;
      dc.id = did;
      structio::write_pdb_file(dc, (fs::path(dir) / rel).string());
      SampleRecord r;
      r.id = did;
      r.structure_path = rel;
      r.role_map = {{"H", ChainRole::heavy}, {"A", ChainRole::antigen}};
      r.cdr_annotation_path = cdr_rel;
      r.label = decoys[k].label;
      r.dockq = decoys[k].quality;
      r.cluster_id = cid;
      records.push_back(std::move(r));
    }
  }
  std::vector<std::string> clusters;
  for (const auto& r : records)
    clusters.push_back(r.cluster_id);
  const auto split = evalkit::split_by_cluster(clusters, {0.6, 0.2, 0.2}, derive_seed(seed, "split"));
  for (size_t k = 0; k < records.size(); ++k)
    records[k].split = evalkit::to_string(split.tags[k]);
  write_manifest((fs::path(dir) / "manifest.jsonl").string(), records);
  return records;
}

} // namespace igpose::decoyforge
