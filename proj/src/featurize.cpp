// SPDX-License-Identifier: Apache-2.0

#include "igpose/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "igpose/binio.hpp"
#include "igpose/error.hpp"

namespace igpose::featurize {

using structio::Complex;
using structio::Residue;

namespace {

constexpr char kEmbMagic[6] = {'I', 'G', 'E', 'M', 'B', '1'};
constexpr const char* kGraphFormat = "igpose-graph";

struct ResidueGeom {
  Eigen::Matrix3Xd atoms;
  Eigen::Vector3d ca;
  Eigen::Vector3d centroid;
  double radius = 0;  // max atom distance from CA
};

ResidueGeom make_geom(const Residue& r) {
  ResidueGeom g;
  g.atoms.resize(3, static_cast<long>(r.atoms.size()));
  for (size_t k = 0; k < r.atoms.size(); ++k)
    g.atoms.col(static_cast<long>(k)) = r.atoms[k].pos;
  const structio::Atom* ca = r.ca();
  if (!ca)
    fail(ErrorKind::validation, "residue " + r.chain_id + ":" +
                                    std::to_string(r.seq_index) + " has no CA");
  g.ca = ca->pos;
  g.centroid = g.atoms.rowwise().mean();
  g.radius = (g.atoms.colwise() - g.ca).colwise().norm().maxCoeff();
  return g;
}

double min_atom_distance(const ResidueGeom& a, const ResidueGeom& b) {
  double best = std::numeric_limits<double>::infinity();
  for (long p = 0; p < a.atoms.cols(); ++p)
    for (long q = 0; q < b.atoms.cols(); ++q)
      best = std::min(best, (a.atoms.col(p) - b.atoms.col(q)).squaredNorm());
  return std::sqrt(best);
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

} // namespace

void FeaturizerConfig::validate() const {
  if (!(tau_intra > 0 && tau_intra <= tau_inter))
    fail(ErrorKind::config, "featurizer requires 0 < tau_intra <= tau_inter");
  if (rbf_count < 2)
    fail(ErrorKind::config, "featurizer requires rbf_count >= 2");
  if (!(rbf_lo > 0 && rbf_lo < rbf_hi))
    fail(ErrorKind::config, "featurizer requires 0 < rbf_lo < rbf_hi");
}

void ResidueGraph::validate() const {
  const long n = node_count();
  if (coords.rows() != n || coords.cols() != 3)
    fail(ErrorKind::dimension, "graph '" + id + "': coords must be N x 3");
  if (node_feats.rows() != n)
    fail(ErrorKind::dimension, "graph '" + id + "': node feature rows != node count");
  if (cdr_mask.size() != static_cast<size_t>(n) ||
      residue_labels.size() != static_cast<size_t>(n))
    fail(ErrorKind::dimension, "graph '" + id + "': mask length != node count");
  if (edge_feats.rows() != static_cast<long>(edges.size()))
    fail(ErrorKind::dimension, "graph '" + id + "': edge feature rows != edge count");
  for (const Edge& e : edges)
    if (e.i < 0 || e.j >= n || e.i >= e.j)
      fail(ErrorKind::validation, "graph '" + id + "': edge (" + std::to_string(e.i) +
                                      "," + std::to_string(e.j) + ") not canonical");
}

PairDistances residue_pair_distances(const Residue& a, const Residue& b) {
  ResidueGeom ga = make_geom(a);
  ResidueGeom gb = make_geom(b);
  return {min_atom_distance(ga, gb), (ga.ca - gb.ca).norm(),
          (ga.centroid - gb.centroid).norm()};
}

Eigen::VectorXd rbf_centers(const FeaturizerConfig& cfg) {
  const int n = cfg.rbf_count;
  Eigen::VectorXd c(n);
  for (int k = 0; k < n; ++k)
    c[k] = cfg.rbf_lo * std::pow(cfg.rbf_hi / cfg.rbf_lo, double(k) / (n - 1));
  c[n - 1] = cfg.rbf_hi;
  return c;
}

Eigen::VectorXd rbf_expand(double d, const FeaturizerConfig& cfg) {
  if (!(d >= 0))
    fail(ErrorKind::data, "rbf_expand: distance must be >= 0");
  const Eigen::VectorXd c = rbf_centers(cfg);
  const int n = cfg.rbf_count;
  Eigen::VectorXd out(n);
  for (int k = 0; k < n; ++k) {
    double width = k + 1 < n ? c[k + 1] - c[k] : c[n - 1] - c[n - 2];
    double dev = d - c[k];
    out[k] = std::exp(-dev * dev / (2 * width * width));
  }
  return out;
}

ResidueGraph build_graph(const Complex& c, const Eigen::MatrixXd& node_feats,
                         const FeaturizerConfig& cfg) {
  cfg.validate();
  structio::validate_roles(c);
  const long n = static_cast<long>(c.residue_count());
  if (node_feats.rows() != n)
    fail(ErrorKind::dimension, "complex '" + c.id + "': " +
                                   std::to_string(node_feats.rows()) +
                                   " feature rows for " + std::to_string(n) + " residues");
  ResidueGraph g;
  g.id = c.id;
  g.node_feats = node_feats;
  g.coords.resize(n, 3);
  std::vector<ResidueGeom> geom;
  geom.reserve(static_cast<size_t>(n));
  for (const structio::Chain& ch : c.chains)
    for (const Residue& r : ch.residues) {
      geom.push_back(make_geom(r));
      g.coords.row(static_cast<long>(geom.size()) - 1) = geom.back().ca.transpose();
      g.node_role.push_back(*ch.role);
      g.cdr_mask.push_back(r.is_cdr ? 1 : 0);
      std::string label = ch.id + ":" + std::to_string(r.seq_index);
      if (r.icode != ' ')
        label += r.icode;
      g.residue_labels.push_back(std::move(label));
    }

  std::vector<PairDistances> dist;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      bool cross = structio::is_ig(g.node_role[i]) != structio::is_ig(g.node_role[j]);
      double tau = cross ? cfg.tau_inter : cfg.tau_intra;
      const ResidueGeom& a = geom[i];
      const ResidueGeom& b = geom[j];
      double d_ca = (a.ca - b.ca).norm();
      // every atom lies within radius of its CA, so this bounds d_min below
      if (d_ca - a.radius - b.radius > tau)
        continue;
      double d_min = min_atom_distance(a, b);
      if (d_min > tau)
        continue;
      g.edges.push_back({i, j, cross ? EdgeKind::inter : EdgeKind::intra});
      dist.push_back({d_min, d_ca, (a.centroid - b.centroid).norm()});
    }

  const int rbf = cfg.rbf_count;
  g.edge_feats.resize(static_cast<long>(g.edges.size()), cfg.edge_dim());
  for (size_t k = 0; k < dist.size(); ++k) {
    const long row = static_cast<long>(k);
    g.edge_feats.block(row, 0, 1, rbf) = rbf_expand(dist[k].d_min, cfg).transpose();
    g.edge_feats.block(row, rbf, 1, rbf) = rbf_expand(dist[k].d_ca, cfg).transpose();
    g.edge_feats.block(row, 2 * rbf, 1, rbf) = rbf_expand(dist[k].d_com, cfg).transpose();
  }
  recompute_interface_set(g);
  return g;
}

void recompute_interface_set(ResidueGraph& g) {
  std::vector<int> s;
  for (const Edge& e : g.edges)
    if (e.kind == EdgeKind::inter) {
      s.push_back(e.i);
      s.push_back(e.j);
    }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  g.interface_set = std::move(s);
}

ResidueGraph remove_inter_edges(const ResidueGraph& g) {
  ResidueGraph out = g;
  out.edges.clear();
  std::vector<long> keep;
  for (size_t k = 0; k < g.edges.size(); ++k)
    if (g.edges[k].kind == EdgeKind::intra) {
      out.edges.push_back(g.edges[k]);
      keep.push_back(static_cast<long>(k));
    }
  out.edge_feats.resize(static_cast<long>(keep.size()), g.edge_feats.cols());
  for (size_t k = 0; k < keep.size(); ++k)
    out.edge_feats.row(static_cast<long>(k)) = g.edge_feats.row(keep[k]);
  recompute_interface_set(out);
  return out;
}

Eigen::MatrixXd load_embeddings(const std::string& path, long expected_rows,
                                const std::string& chain_id) {
  const std::string who = chain_id.empty() ? path : "chain " + chain_id + " (" + path + ")";
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, "cannot open embedding file " + path);
  char magic[6] = {};
  in.read(magic, 6);
  if (in.gcount() != 6 || !std::equal(magic, magic + 6, kEmbMagic))
    fail(ErrorKind::parse, "embedding file " + path + " lacks IGEMB1 magic");
  auto rows = binio::read_le<std::uint64_t>(in, "embedding header");
  auto cols = binio::read_le<std::uint64_t>(in, "embedding header");
  if (static_cast<long>(rows) != expected_rows || cols != kEmbeddingDim)
    fail(ErrorKind::dimension, "embedding for " + who + " is " + std::to_string(rows) +
                                   "x" + std::to_string(cols) + ", expected " +
                                   std::to_string(expected_rows) + "x" +
                                   std::to_string(kEmbeddingDim));
  Eigen::MatrixXd m(static_cast<long>(rows), static_cast<long>(cols));
  for (long r = 0; r < m.rows(); ++r)
    for (long k = 0; k < m.cols(); ++k)
      m(r, k) = binio::read_le<float>(in, "embedding data");
  if (!all_finite(m))
    fail(ErrorKind::data, "embedding for " + who + " contains non-finite values");
  return m;
}

void write_embeddings(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    fail(ErrorKind::io, "cannot write " + path);
  out.write(kEmbMagic, 6);
  binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (long r = 0; r < m.rows(); ++r)
    for (long k = 0; k < m.cols(); ++k)
      binio::write_le<float>(out, static_cast<float>(m(r, k)));
}

Eigen::MatrixXd fallback_features(const Complex& c) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<long>(c.residue_count()),
                                            kEmbeddingDim);
  long row = 0;
  for (const structio::Chain& ch : c.chains) {
    if (!ch.role)
      fail(ErrorKind::validation, "chain " + ch.id + " has no role");
    for (const Residue& r : ch.residues) {
      m(row, structio::amino_acid_index(r.resname)) = 1;
      m(row, 20 + static_cast<int>(*ch.role)) = 1;
      m(row, 23) = r.is_cdr ? 1 : 0;
      ++row;
    }
  }
  return m;
}

Eigen::MatrixXd assemble_node_features(const Complex& c,
                                       const std::map<std::string, std::string>& paths) {
  if (paths.empty())
    return fallback_features(c);
  Eigen::MatrixXd m(static_cast<long>(c.residue_count()), kEmbeddingDim);
  long row = 0;
  for (const structio::Chain& ch : c.chains) {
    auto it = paths.find(ch.id);
    if (it == paths.end())
      fail(ErrorKind::config, "complex '" + c.id + "': no embedding for chain " + ch.id +
                                  " (embeddings and fallback features cannot be mixed)");
    const long rows = static_cast<long>(ch.residues.size());
    m.middleRows(row, rows) = load_embeddings(it->second, rows, ch.id);
    row += rows;
  }
  return m;
}

void save_graph(const ResidueGraph& g, const std::string& path) {
  g.validate();
  nlohmann::json h;
  h["format"] = kGraphFormat;
  h["version"] = 1;
  h["dtype"] = "f64";
  h["id"] = g.id;
  h["node_count"] = g.node_count();
  h["node_dim"] = g.node_feats.cols();
  h["edge_count"] = g.edges.size();
  h["edge_dim"] = g.edge_feats.cols();
  std::vector<int> roles, cdr, ei, ej, kinds;
  for (ChainRole r : g.node_role)
    roles.push_back(static_cast<int>(r));
  for (auto m : g.cdr_mask)
    cdr.push_back(m);
  for (const Edge& e : g.edges) {
    ei.push_back(e.i);
    ej.push_back(e.j);
    kinds.push_back(static_cast<int>(e.kind));
  }
  h["node_role"] = roles;
  h["cdr_mask"] = cdr;
  h["residue_labels"] = g.residue_labels;
  h["edge_i"] = ei;
  h["edge_j"] = ej;
  h["edge_kind"] = kinds;
  h["blob"] = {"coords", "node_feats", "edge_feats"};

  std::ofstream out(path, std::ios::binary);
  if (!out)
    fail(ErrorKind::io, "cannot write " + path);
  out << h.dump() << '\n';
  auto put = [&](const Eigen::MatrixXd& m) {
    for (long r = 0; r < m.rows(); ++r)
      for (long k = 0; k < m.cols(); ++k)
        binio::write_le<double>(out, m(r, k));
  };
  put(g.coords);
  put(g.node_feats);
  put(g.edge_feats);
}

ResidueGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, "cannot open graph file " + path);
  std::string line;
  std::getline(in, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "graph file " + path + ": bad header: " + e.what());
  }
  if (h.value("format", "") != kGraphFormat || h.value("version", 0) != 1)
    fail(ErrorKind::parse, "graph file " + path + ": unsupported format");
  ResidueGraph g;
  g.id = h["id"].get<std::string>();
  const long n = h["node_count"].get<long>();
  const long ne = h["edge_count"].get<long>();
  for (int r : h["node_role"].get<std::vector<int>>())
    g.node_role.push_back(static_cast<ChainRole>(r));
  for (int m : h["cdr_mask"].get<std::vector<int>>())
    g.cdr_mask.push_back(static_cast<std::uint8_t>(m));
  g.residue_labels = h["residue_labels"].get<std::vector<std::string>>();
  auto ei = h["edge_i"].get<std::vector<int>>();
  auto ej = h["edge_j"].get<std::vector<int>>();
  auto kinds = h["edge_kind"].get<std::vector<int>>();
  if (static_cast<long>(ei.size()) != ne || ej.size() != ei.size() ||
      kinds.size() != ei.size() || static_cast<long>(g.node_role.size()) != n)
    fail(ErrorKind::parse, "graph file " + path + ": inconsistent header");
  for (size_t k = 0; k < ei.size(); ++k)
    g.edges.push_back({ei[k], ej[k], static_cast<EdgeKind>(kinds[k])});
  auto get = [&](long rows, long cols) {
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r)
      for (long k = 0; k < cols; ++k)
        m(r, k) = binio::read_le<double>(in, "graph blob in " + path);
    return m;
  };
  g.coords = get(n, 3);
  g.node_feats = get(n, h["node_dim"].get<long>());
  g.edge_feats = get(ne, h["edge_dim"].get<long>());
  recompute_interface_set(g);
  g.validate();
  return g;
}

} // namespace igpose::featurize
