// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "igpose/decoyforge.hpp"
#include "igpose/featurize.hpp"
#include "test_util.hpp"

using namespace igpose;
using namespace igpose::featurize;
using structio::Atom;
using structio::Chain;
using structio::Complex;
using structio::Residue;
using structio::Vec3;

namespace {

Residue make_res(const std::string& chain, int seq, const std::string& resname,
                 const std::vector<Vec3>& atoms) {
  Residue r;
  r.chain_id = chain;
  r.seq_index = seq;
  r.resname = resname;
  const char* names[] = {"CA", "N", "C", "O", "CB"};
  for (size_t k = 0; k < atoms.size(); ++k)
    r.atoms.push_back(Atom{names[k], k == 1 ? "N" : "C", atoms[k], 1.0, ' '});
  return r;
}

Complex two_residue(double separation) {
  Complex c;
  c.id = "pair";
  Chain h{"H", ChainRole::heavy, {make_res("H", 1, "GLY", {Vec3(0, 0, 0)})}};
  Chain a{"A", ChainRole::antigen, {make_res("A", 1, "GLY", {Vec3(separation, 0, 0)})}};
  c.chains = {h, a};
  return c;
}

double min_dist_oracle(const Residue& a, const Residue& b) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& x : a.atoms)
    for (const auto& y : b.atoms)
      m = std::min(m, (x.pos - y.pos).norm());
  return m;
}

} // namespace

TEST_CASE("residue_pair_distances") {
  SUBCASE("identical residues") {
    const auto r = make_res("H", 1, "GLY", {Vec3(1, 2, 3), Vec3(2, 2, 3)});
    const auto d = residue_pair_distances(r, r);
    CHECK(d.d_min == 0);
    CHECK(d.d_ca == 0);
    CHECK(d.d_com == 0);
  }
  SUBCASE("3-4-5 triangle") {
    const auto a = make_res("H", 1, "GLY", {Vec3(0, 0, 0)});
    const auto b = make_res("A", 1, "GLY", {Vec3(3, 4, 0)});
    const auto d = residue_pair_distances(a, b);
    CHECK(d.d_min == doctest::Approx(5).epsilon(1e-15));
    CHECK(d.d_ca == doctest::Approx(5).epsilon(1e-15));
    CHECK(d.d_com == doctest::Approx(5).epsilon(1e-15));
  }
  SUBCASE("3-atom residues against the exhaustive oracle") {
    const auto a = make_res("H", 1, "SER", {Vec3(0, 0, 0), Vec3(-1.2, 0.5, 0.1), Vec3(1.3, 0.4, -0.2)});
    const auto b = make_res("A", 1, "SER", {Vec3(4, 1, 0.5), Vec3(2.9, 1.3, 0.2), Vec3(5.1, 0.2, 1.0)});
    const auto d = residue_pair_distances(a, b);
    Vec3 ca(0, 0, 0), cb(0, 0, 0);
    for (const auto& x : a.atoms)
      ca += x.pos / 3.0;
    for (const auto& x : b.atoms)
      cb += x.pos / 3.0;
    CHECK(d.d_min == doctest::Approx(min_dist_oracle(a, b)).epsilon(1e-14));
    CHECK(d.d_ca == doctest::Approx((Vec3(4, 1, 0.5)).norm()).epsilon(1e-14));
    CHECK(d.d_com == doctest::Approx((ca - cb).norm()).epsilon(1e-14));
  }
}

TEST_CASE("rbf_expand") {
  FeaturizerConfig cfg;
  const auto centers = rbf_centers(cfg);
  // log-spaced on [0.25, 8], from a 40-digit reference
  const double want_c[10] = {0.25, 0.36743362306889971285, 0.54002986944615308494,
                             0.79370052598409973738, 1.1665290395761165809,
                             1.7144879657061456618, 2.5198420997897463295,
                             3.7034988491491617168, 5.443160000697507857, 8.0};
  REQUIRE(centers.size() == 10);
  for (int k = 0; k < 10; ++k)
    CHECK(centers(k) == doctest::Approx(want_c[k]).epsilon(1e-14));

  CHECK(rbf_expand(0.25, cfg)(0) == 1.0);
  CHECK(rbf_expand(8.0, cfg)(9) == 1.0);

  const double want5[10] = {0.0,
                            3.6697849297420103688e-157,
                            7.5164392871362909223e-68,
                            2.2913989599186131935e-28,
                            2.3562288330730660369e-11,
                            0.00024322735780891606773,
                            0.11133459524679517347,
                            0.75751890668253103052,
                            0.98509175796702345675,
                            0.50240746354981052432};
  const auto v = rbf_expand(5.0, cfg);
  REQUIRE(v.size() == 10);
  for (int k = 0; k < 10; ++k) {
    CHECK(std::abs(v(k) - want5[k]) <= 1e-12 * std::max(want5[k], 1e-300));
  }
  // components stay within [0, 1] (underflow to 0 far from a center)
  for (double d : {0.0, 0.1, 0.25, 1.0, 3.3, 7.9, 8.0, 10.0, 30.0}) {
    const auto e = rbf_expand(d, cfg);
    CHECK(e.minCoeff() >= 0.0);
    CHECK(e.maxCoeff() <= 1.0);
  }
}

TEST_CASE("featurizer config validation") {
  FeaturizerConfig c;
  c.validate();
  CHECK(c.edge_dim() == 30);
  c.tau_intra = 11;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::config);
  c = {};
  c.rbf_count = 1;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::config);
  c = {};
  c.rbf_lo = 9;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::config);
}

TEST_CASE("build_graph cutoffs") {
  FeaturizerConfig cfg;
  SUBCASE("d_min 10.5 -> no inter edge") {
    const auto c = two_residue(10.5);
    const auto g = build_graph(c, fallback_features(c), cfg);
    CHECK(g.edges.empty());
    CHECK(g.nondocking());
  }
  SUBCASE("d_min 3.4 -> one inter edge") {
    const auto c = two_residue(3.4);
    const auto g = build_graph(c, fallback_features(c), cfg);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0] == Edge{0, 1, EdgeKind::inter});
    CHECK(g.interface_set == std::vector<int>{0, 1});
    CHECK(g.edge_feats.rows() == 1);
    CHECK(g.edge_feats.cols() == 30);
  }
  SUBCASE("exactly at the cutoff counts") {
    const auto c = two_residue(10.0);
    CHECK(build_graph(c, fallback_features(c), cfg).edges.size() == 1);
  }
  SUBCASE("feature row mismatch") {
    const auto c = two_residue(3.0);
    CHECK_ERROR_KIND(build_graph(c, Eigen::MatrixXd::Zero(3, 320), cfg), ErrorKind::dimension);
  }
}

TEST_CASE("build_graph on a random 20-residue complex equals the brute-force oracle") {
  FeaturizerConfig cfg;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = decoyforge::micro_complex(10, 10, seed);
    const auto g = build_graph(c, fallback_features(c), cfg);
    std::vector<const Residue*> res;
    std::vector<bool> ig;
    for (const auto& ch : c.chains)
      for (const auto& r : ch.residues) {
        res.push_back(&r);
        ig.push_back(*ch.role != ChainRole::antigen);
      }
    REQUIRE(g.node_count() == 20);
    std::vector<Edge> want;
    std::vector<std::array<double, 3>> want_d;
    for (int i = 0; i < 20; ++i)
      for (int j = i + 1; j < 20; ++j) {
        const bool cross = ig[i] != ig[j];
        const double d = min_dist_oracle(*res[i], *res[j]);
        if (d <= (cross ? cfg.tau_inter : cfg.tau_intra))
          want.push_back({i, j, cross ? EdgeKind::inter : EdgeKind::intra});
      }
    CHECK(g.edges == want);
    // invariants
    std::set<int> ends;
    for (size_t k = 0; k < g.edges.size(); ++k) {
      const auto& e = g.edges[k];
      CHECK(e.i < e.j);
      if (e.kind == EdgeKind::inter) {
        CHECK(ig[e.i] != ig[e.j]);
        ends.insert(e.i);
        ends.insert(e.j);
      } else {
        CHECK(ig[e.i] == ig[e.j]);
      }
      // first RBF block encodes d_min
      const auto ex = rbf_expand(min_dist_oracle(*res[e.i], *res[e.j]), cfg);
      for (int b = 0; b < 10; ++b)
        CHECK(g.edge_feats(static_cast<long>(k), b) == doctest::Approx(ex(b)).epsilon(1e-12));
    }
    CHECK(std::vector<int>(ends.begin(), ends.end()) == g.interface_set);
    CHECK(g.edge_feats.rows() == static_cast<long>(g.edges.size()));
    g.validate();
  }
}

TEST_CASE("fallback features against a lookup table") {
  Complex c;
  c.chains = {Chain{"H", ChainRole::heavy,
                    {make_res("H", 1, "TRP", {Vec3(0, 0, 0)}), make_res("H", 2, "ALA", {Vec3(4, 0, 0)})}},
              Chain{"L", ChainRole::light, {make_res("L", 1, "CYS", {Vec3(0, 4, 0)})}},
              Chain{"A", ChainRole::antigen, {make_res("A", 1, "VAL", {Vec3(0, 0, 4)})}}};
  c.chains[0].residues[1].is_cdr = true;
  const auto m = fallback_features(c);
  REQUIRE(m.rows() == 4);
  REQUIRE(m.cols() == 320);
  const std::vector<std::string> aa = {"ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU",
                                       "GLY", "HIS", "ILE", "LEU", "LYS", "MET", "PHE",
                                       "PRO", "SER", "THR", "TRP", "TYR", "VAL"};
  struct Row {
    const char* res;
    int role;
    int cdr;
  };
  const Row rows[4] = {{"TRP", 1, 0}, {"ALA", 1, 1}, {"CYS", 2, 0}, {"VAL", 0, 0}};
  for (int r = 0; r < 4; ++r) {
    Eigen::RowVectorXd want = Eigen::RowVectorXd::Zero(320);
    want(std::find(aa.begin(), aa.end(), rows[r].res) - aa.begin()) = 1;
    want(20 + rows[r].role) = 1;
    want(23) = rows[r].cdr;
    CHECK((m.row(r) - want).cwiseAbs().maxCoeff() == 0);
  }
  CHECK(fallback_features(c) == m);
}

TEST_CASE("embedding files") {
  testutil::TempDir tmp("emb");
  Eigen::MatrixXd e = Eigen::MatrixXd::Random(120, 320);
  write_embeddings(tmp.str("ok.emb"), e);
  const auto back = load_embeddings(tmp.str("ok.emb"), 120, "H");
  CHECK((back - e.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0);
  Eigen::MatrixXd short_ = Eigen::MatrixXd::Random(119, 320);
  write_embeddings(tmp.str("short.emb"), short_);
  CHECK_ERROR_KIND(load_embeddings(tmp.str("short.emb"), 120, "H"), ErrorKind::dimension);
  Eigen::MatrixXd nan = e;
  nan(3, 7) = std::numeric_limits<double>::quiet_NaN();
  write_embeddings(tmp.str("nan.emb"), nan);
  CHECK_ERROR_KIND(load_embeddings(tmp.str("nan.emb"), 120, "H"), ErrorKind::data);
  testutil::spit(tmp.str("bad.emb"), "not an embedding");
  CHECK_ERROR_KIND(load_embeddings(tmp.str("bad.emb"), 120, "H"), ErrorKind::parse);
  CHECK_ERROR_KIND(load_embeddings(tmp.str("missing.emb"), 120, "H"), ErrorKind::io);
}

TEST_CASE("assemble_node_features stacks chains in node order") {
  testutil::TempDir tmp("asm");
  auto c = decoyforge::micro_complex(3, 2, 5);
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(3, 320, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(2, 320, 2.0);
  write_embeddings(tmp.str("h.emb"), h);
  write_embeddings(tmp.str("a.emb"), a);
  const auto m = assemble_node_features(c, {{"H", tmp.str("h.emb")}, {"A", tmp.str("a.emb")}});
  CHECK(m.topRows(3).minCoeff() == 1.0);
  CHECK(m.bottomRows(2).minCoeff() == 2.0);
  CHECK_ERROR_KIND(assemble_node_features(c, {{"H", tmp.str("h.emb")}}), ErrorKind::config);
  CHECK(assemble_node_features(c, {}) == fallback_features(c));
}

TEST_CASE("nondocking ablation and graph cache") {
  testutil::TempDir tmp("igg");
  const auto c = decoyforge::micro_complex(6, 6, 9);
  const auto g = build_graph(c, fallback_features(c), FeaturizerConfig{});
  REQUIRE_FALSE(g.nondocking());
  const auto nd = remove_inter_edges(g);
  CHECK(nd.nondocking());
  for (const auto& e : nd.edges)
    CHECK(e.kind == EdgeKind::intra);
  CHECK(nd.edge_feats.rows() == static_cast<long>(nd.edges.size()));
  CHECK(nd.node_count() == g.node_count());

  save_graph(g, tmp.str("g.igg"));
  const auto back = load_graph(tmp.str("g.igg"));
  CHECK(back.id == g.id);
  CHECK(back.edges == g.edges);
  CHECK(back.coords == g.coords);
  CHECK(back.node_feats == g.node_feats);
  CHECK(back.edge_feats == g.edge_feats);
  CHECK(back.node_role == g.node_role);
  CHECK(back.cdr_mask == g.cdr_mask);
  CHECK(back.interface_set == g.interface_set);
  CHECK(back.residue_labels == g.residue_labels);
  // byte-stable
  save_graph(back, tmp.str("h.igg"));
  CHECK(testutil::slurp(tmp.str("g.igg")) == testutil::slurp(tmp.str("h.igg")));

  std::string text = testutil::slurp(tmp.str("g.igg"));
  testutil::spit(tmp.str("trunc.igg"), text.substr(0, text.size() - 9));
  CHECK_ERROR_KIND(load_graph(tmp.str("trunc.igg")), ErrorKind::parse);
}
