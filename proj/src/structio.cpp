// SPDX-License-Identifier: Apache-2.0

#include "igpose/structio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "igpose/error.hpp"

namespace igpose::structio {

namespace {

const std::vector<std::string> kAminoAcids = {
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

std::string_view column(std::string_view line, size_t first, size_t len) {
  if (first >= line.size())
    return {};
  return line.substr(first, std::min(len, line.size() - first));
}

[[noreturn]] void parse_fail(size_t line_no, const std::string& msg) {
  fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + msg);
}

double to_double(std::string_view field, size_t line_no, const char* what) {
  field = trim(field);
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(v))
    parse_fail(line_no, std::string("bad ") + what + " '" + std::string(field) + "'");
  return v;
}

int to_int(std::string_view field, size_t line_no, const char* what) {
  field = trim(field);
  int v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    parse_fail(line_no, std::string("bad ") + what + " '" + std::string(field) + "'");
  return v;
}

std::string guess_element(std::string_view atom_name) {
  for (char ch : atom_name)
    if (std::isalpha(static_cast<unsigned char>(ch)))
      return std::string(1, ch);
  return "X";
}

struct RawAtom {
  Atom atom;
  std::string resname;
};

struct RawResidue {
  int seq = 0;
  char icode = ' ';
  std::vector<RawAtom> atoms;
};

struct RawChain {
  std::string id;
  std::vector<RawResidue> residues;
};

std::string residue_label(const std::string& chain, int seq, char icode) {
  std::string s = chain + ":" + std::to_string(seq);
  if (icode != ' ')
    s += icode;
  return s;
}

// Picks the altloc letter with the highest mean occupancy within a residue.
char choose_altloc(const std::vector<RawAtom>& atoms) {
  std::map<char, std::pair<double, int>> occ;  // letter -> (sum, count)
  for (const RawAtom& a : atoms)
    if (a.atom.altloc != ' ') {
      auto& e = occ[a.atom.altloc];
      e.first += a.atom.occupancy;
      e.second += 1;
    }
  char best = ' ';
  double best_occ = -1;
  // std::map iterates letters in ascending order, so strict '>' keeps the
  // smallest letter on ties.
  for (const auto& [letter, e] : occ) {
    double mean = e.first / e.second;
    if (mean > best_occ) {
      best_occ = mean;
      best = letter;
    }
  }
  return best;
}

} // namespace

const char* to_string(ChainRole r) {
  switch (r) {
    case ChainRole::antigen: return "antigen";
    case ChainRole::heavy: return "heavy";
    case ChainRole::light: return "light";
  }
  return "?";
}

ChainRole parse_role(std::string_view s) {
  if (s == "antigen" || s == "ag")
    return ChainRole::antigen;
  if (s == "heavy")
    return ChainRole::heavy;
  if (s == "light")
    return ChainRole::light;
  fail(ErrorKind::validation, "unknown chain role '" + std::string(s) + "'");
}

int amino_acid_index(std::string_view resname) {
  auto it = std::lower_bound(kAminoAcids.begin(), kAminoAcids.end(), resname);
  if (it != kAminoAcids.end() && *it == resname)
    return static_cast<int>(it - kAminoAcids.begin());
  return -1;
}

const std::vector<std::string>& standard_amino_acids() { return kAminoAcids; }

const Atom* Residue::find_atom(std::string_view atom_name) const {
  for (const Atom& a : atoms)
    if (a.name == atom_name)
      return &a;
  return nullptr;
}

const Chain* Complex::find_chain(std::string_view chain_id) const {
  for (const Chain& ch : chains)
    if (ch.id == chain_id)
      return &ch;
  return nullptr;
}

Chain* Complex::find_chain(std::string_view chain_id) {
  for (Chain& ch : chains)
    if (ch.id == chain_id)
      return &ch;
  return nullptr;
}

size_t Complex::residue_count() const {
  size_t n = 0;
  for (const Chain& ch : chains)
    n += ch.residues.size();
  return n;
}

Complex parse_pdb(std::string_view text, std::string id,
                  std::vector<std::string>* warnings) {
  auto warn = [&](const std::string& msg) {
    if (warnings)
      warnings->push_back(msg);
  };

  std::vector<RawChain> raw;
  size_t records = 0;
  size_t hetatm = 0;
  size_t line_no = 0;
  size_t pos = 0;
  bool saw_model_end = false;
  while (pos < text.size() && !saw_model_end) {
    size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos
                                                 ? std::string_view::npos
                                                 : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    std::string_view rec = trim(column(line, 0, 6));
    if (rec == "ENDMDL" || rec == "END") {
      saw_model_end = records > 0;
      continue;
    }
    if (rec == "HETATM") {
      ++records;
      ++hetatm;
      continue;
    }
    if (rec != "ATOM")
      continue;
    ++records;
    if (line.size() < 54)
      parse_fail(line_no, "ATOM record too short (" + std::to_string(line.size()) +
                              " columns)");
    RawAtom ra;
    ra.atom.name = std::string(trim(column(line, 12, 4)));
    ra.atom.altloc = line[16];
    ra.resname = std::string(trim(column(line, 17, 3)));
    std::string chain_id(1, line[21]);
    int seq = to_int(column(line, 22, 4), line_no, "residue number");
    char icode = line.size() > 26 ? line[26] : ' ';
    ra.atom.pos = Vec3(to_double(column(line, 30, 8), line_no, "x coordinate"),
                       to_double(column(line, 38, 8), line_no, "y coordinate"),
                       to_double(column(line, 46, 8), line_no, "z coordinate"));
    std::string_view occ = trim(column(line, 54, 6));
    ra.atom.occupancy = occ.empty() ? 1.0 : to_double(occ, line_no, "occupancy");
    if (ra.atom.occupancy < 0 || ra.atom.occupancy > 1)
      parse_fail(line_no, "occupancy outside [0,1]");
    std::string_view elem = trim(column(line, 76, 2));
    ra.atom.element = elem.empty() ? guess_element(ra.atom.name) : std::string(elem);
    if (ra.atom.name.empty())
      parse_fail(line_no, "empty atom name");

    auto ch = std::find_if(raw.begin(), raw.end(),
                           [&](const RawChain& c) { return c.id == chain_id; });
    if (ch == raw.end()) {
      raw.push_back(RawChain{chain_id, {}});
      ch = raw.end() - 1;
    }
    auto res = std::find_if(ch->residues.begin(), ch->residues.end(),
                            [&](const RawResidue& r) {
                              return r.seq == seq && r.icode == icode;
                            });
    if (res == ch->residues.end()) {
      ch->residues.push_back(RawResidue{seq, icode, {}});
      res = ch->residues.end() - 1;
    }
    res->atoms.push_back(std::move(ra));
  }
  if (records == 0)
    fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                               ": no ATOM/HETATM records found");
  if (hetatm > 0)
    warn(std::to_string(hetatm) + " HETATM records dropped");

  Complex c;
  c.id = std::move(id);
  for (RawChain& rc : raw) {
    std::stable_sort(rc.residues.begin(), rc.residues.end(),
                     [](const RawResidue& a, const RawResidue& b) {
                       return a.seq != b.seq ? a.seq < b.seq : a.icode < b.icode;
                     });
    Chain chain;
    chain.id = rc.id;
    for (RawResidue& rr : rc.residues) {
      const std::string label = residue_label(rc.id, rr.seq, rr.icode);
      char alt = choose_altloc(rr.atoms);
      Residue r;
      r.chain_id = rc.id;
      r.seq_index = rr.seq;
      r.icode = rr.icode;
      std::set<std::string> names;
      for (RawAtom& ra : rr.atoms) {
        if (ra.atom.altloc != ' ' && ra.atom.altloc != alt)
          continue;
        if (r.resname.empty())
          r.resname = ra.resname;
        if (!names.insert(ra.atom.name).second) {
          warn("duplicate atom " + ra.atom.name + " in " + label + " ignored");
          continue;
        }
        r.atoms.push_back(std::move(ra.atom));
      }
      if (amino_acid_index(r.resname) < 0) {
        warn("non-standard residue " + r.resname + " at " + label + " dropped");
        continue;
      }
      if (!r.ca()) {
        warn("residue " + r.resname + " at " + label + " has no CA, dropped");
        continue;
      }
      chain.residues.push_back(std::move(r));
    }
    if (!chain.residues.empty())
      c.chains.push_back(std::move(chain));
  }
  if (c.residue_count() == 0)
    fail(ErrorKind::empty_set, "structure '" + c.id + "' has no standard residues");
  return c;
}

Complex read_pdb_file(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, "cannot open structure file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string stem = path.substr(path.find_last_of('/') + 1);
  stem = stem.substr(0, stem.find_last_of('.'));
  try {
    return parse_pdb(ss.str(), stem, warnings);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::string write_pdb(const Complex& c) {
  std::string out;
  char buf[96];
  int serial = 1;
  for (const Chain& ch : c.chains) {
    if (ch.id.size() != 1)
      fail(ErrorKind::validation, "PDB chain id must be one character: '" + ch.id + "'");
    for (const Residue& r : ch.residues)
      for (const Atom& a : r.atoms) {
        // 4-character names start in column 13, shorter ones in column 14.
        std::string name = a.name.size() >= 4 ? a.name : " " + a.name;
        std::snprintf(buf, sizeof buf,
                      "ATOM  %5d %-4s%c%3s %c%4d%c   %8.3f%8.3f%8.3f%6.2f%6.2f"
                      "          %2s\n",
                      serial++ % 100000, name.c_str(), a.altloc, r.resname.c_str(),
                      ch.id[0], r.seq_index, r.icode, a.pos.x(), a.pos.y(),
                      a.pos.z(), a.occupancy, 0.0, a.element.c_str());
        out += buf;
      }
    out += "TER\n";
  }
  out += "END\n";
  return out;
}

void write_pdb_file(const Complex& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    fail(ErrorKind::io, "cannot write " + path);
  out << write_pdb(c);
}

void validate_roles(const Complex& c) {
  int ig = 0;
  int ag = 0;
  for (const Chain& ch : c.chains) {
    if (!ch.role)
      fail(ErrorKind::validation, "chain " + ch.id + " has no role");
    (is_ig(*ch.role) ? ig : ag) += 1;
  }
  if (ig == 0)
    fail(ErrorKind::validation, "complex '" + c.id + "' has no immunoglobulin chain");
  if (ag != 1)
    fail(ErrorKind::validation, "complex '" + c.id + "' must have exactly one antigen "
                                "chain, found " + std::to_string(ag));
}

Complex assign_roles(Complex c, const RoleMap& mapping) {
  for (Chain& ch : c.chains) {
    auto it = mapping.find(ch.id);
    if (it == mapping.end())
      fail(ErrorKind::validation, "chain " + ch.id + " of '" + c.id +
                                      "' missing from role mapping");
    ch.role = it->second;
  }
  validate_roles(c);
  return c;
}

RoleMap parse_role_pairs(const std::vector<std::string>& pairs) {
  RoleMap m;
  for (const std::string& p : pairs) {
    size_t eq = p.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorKind::config, "role pair '" + p + "' is not chain=role");
    m[p.substr(0, eq)] = parse_role(p.substr(eq + 1));
  }
  return m;
}

CdrAnnotation parse_cdr_annotation(std::string_view text) {
  CdrAnnotation ann;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty())
      continue;
    std::istringstream fields{std::string(body)};
    std::string chain;
    int start = 0;
    int end = 0;
    std::string extra;
    if (!(fields >> chain >> start >> end) || (fields >> extra))
      parse_fail(line_no, "expected 'chain_id start end'");
    if (start > end)
      parse_fail(line_no, "range start exceeds end");
    ann[chain].emplace_back(start, end);
  }
  return ann;
}

CdrAnnotation read_cdr_annotation_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::io, "cannot open CDR annotation " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_cdr_annotation(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::string format_cdr_annotation(const CdrAnnotation& ann) {
  std::string out;
  for (const auto& [chain, ranges] : ann)
    for (const auto& [a, b] : ranges)
      out += chain + " " + std::to_string(a) + " " + std::to_string(b) + "\n";
  return out;
}

Complex apply_cdr_annotation(Complex c, const CdrAnnotation& ann) {
  for (Chain& ch : c.chains)
    for (Residue& r : ch.residues)
      r.is_cdr = false;
  for (const auto& [chain_id, ranges] : ann) {
    Chain* ch = c.find_chain(chain_id);
    if (!ch)
      fail(ErrorKind::validation, "CDR annotation references unknown chain " + chain_id);
    if (ch->role && !is_ig(*ch->role))
      fail(ErrorKind::validation, "CDR annotation on antigen chain " + chain_id);
    int lo = ch->residues.front().seq_index;
    int hi = ch->residues.back().seq_index;
    for (const auto& [a, b] : ranges) {
      if (a > b || a < lo || b > hi)
        fail(ErrorKind::validation, "CDR range " + std::to_string(a) + "-" +
                                        std::to_string(b) + " outside chain " +
                                        chain_id + " [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "]");
      for (Residue& r : ch->residues)
        if (r.seq_index >= a && r.seq_index <= b)
          r.is_cdr = true;
    }
  }
  return c;
}

CdrAnnotation heuristic_cdr_windows(const Complex& c) {
  static const std::vector<std::pair<int, int>> heavy = {{26, 32}, {52, 56}, {95, 102}};
  static const std::vector<std::pair<int, int>> light = {{24, 34}, {50, 56}, {89, 97}};
  CdrAnnotation ann;
  for (const Chain& ch : c.chains) {
    if (!ch.role || !is_ig(*ch.role) || ch.residues.empty())
      continue;
    int lo = ch.residues.front().seq_index;
    int hi = ch.residues.back().seq_index;
    for (auto [a, b] : *ch.role == ChainRole::heavy ? heavy : light) {
      a = std::max(a, lo);
      b = std::min(b, hi);
      if (a <= b)
        ann[ch.id].emplace_back(a, b);
    }
  }
  return ann;
}

} // namespace igpose::structio
