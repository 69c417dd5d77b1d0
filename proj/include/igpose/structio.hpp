// SPDX-License-Identifier: Apache-2.0
//
// Structure input: PDB parsing with altloc/HETATM cleaning, chain roles and
// CDR annotation sidecar files.

#ifndef IGPOSE_STRUCTIO_HPP_
#define IGPOSE_STRUCTIO_HPP_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace igpose::structio {

using Vec3 = Eigen::Vector3d;

// The enumerator values double as node-type class indices.
enum class ChainRole { antigen = 0, heavy = 1, light = 2 };

inline bool is_ig(ChainRole r) { return r != ChainRole::antigen; }
const char* to_string(ChainRole r);
ChainRole parse_role(std::string_view s);

// Index of a standard 3-letter residue code in alphabetical order, or -1.
int amino_acid_index(std::string_view resname);
const std::vector<std::string>& standard_amino_acids();

struct Atom {
  std::string name;
  std::string element;
  Vec3 pos = Vec3::Zero();
  double occupancy = 1.0;
  char altloc = ' ';

  bool operator==(const Atom&) const = default;
};

struct Residue {
  std::string chain_id;
  int seq_index = 0;  // PDB resSeq
  char icode = ' ';
  std::string resname;
  std::vector<Atom> atoms;
  bool is_cdr = false;

  const Atom* find_atom(std::string_view atom_name) const;
  const Atom* ca() const { return find_atom("CA"); }
  bool operator==(const Residue&) const = default;
};

struct Chain {
  std::string id;
  std::optional<ChainRole> role;
  std::vector<Residue> residues;

  bool operator==(const Chain&) const = default;
};

struct Complex {
  std::string id;
  std::vector<Chain> chains;

  const Chain* find_chain(std::string_view chain_id) const;
  Chain* find_chain(std::string_view chain_id);
  size_t residue_count() const;
  bool operator==(const Complex&) const = default;
};

using RoleMap = std::map<std::string, ChainRole>;
// chain id -> inclusive seq_index ranges
using CdrAnnotation = std::map<std::string, std::vector<std::pair<int, int>>>;

// Parses ATOM records of the first model. HETATM records are dropped, each
// residue keeps only its highest-occupancy altloc (ties go to the smallest
// altloc letter), residues without CA or with a non-standard name are
// dropped and reported through `warnings`.
Complex parse_pdb(std::string_view text, std::string id = {},
                  std::vector<std::string>* warnings = nullptr);
Complex read_pdb_file(const std::string& path,
                      std::vector<std::string>* warnings = nullptr);

std::string write_pdb(const Complex& c);
void write_pdb_file(const Complex& c, const std::string& path);

// Attaches roles and checks for >=1 Ig chain and exactly one antigen chain.
Complex assign_roles(Complex c, const RoleMap& mapping);
// Parses "H=heavy" style pairs.
RoleMap parse_role_pairs(const std::vector<std::string>& pairs);
void validate_roles(const Complex& c);

// Sidecar format: one "chain_id start end" record per line, '#' comments.
CdrAnnotation parse_cdr_annotation(std::string_view text);
CdrAnnotation read_cdr_annotation_file(const std::string& path);
std::string format_cdr_annotation(const CdrAnnotation& ann);

// Sets is_cdr exactly on residues covered by `ann`; rejects antigen chains
// and ranges outside the chain's seq_index extent.
Complex apply_cdr_annotation(Complex c, const CdrAnnotation& ann);

// Fixed Chothia-like index windows clipped to each Ig chain. Fixture helper
// only, not a numbering engine.
CdrAnnotation heuristic_cdr_windows(const Complex& c);

} // namespace igpose::structio

#endif
