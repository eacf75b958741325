#include "ecpipe/seqio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "ecpipe/error.hpp"

namespace ecpipe::seqio {
namespace {

// Characters that read as 'X' after uppercasing.
bool is_ambiguity_code(char c) {
  return c == 'B' || c == 'Z' || c == 'U' || c == 'O' || c == 'J';
}

char normalize_residue(char c) {
  c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (is_ambiguity_code(c)) return 'X';
  return c;
}

struct RawRecord {
  std::string id;
  std::string body;       // raw sequence characters, line breaks removed
  std::size_t header_line = 0;
  std::size_t first_body_line = 0;
};

// Shared record scanner for both plain and aligned FASTA. Validates the
// record structure; residue-level normalization is done by the callers.
std::vector<RawRecord> scan_records(const std::string& text) {
  std::vector<RawRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_content = false;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    if (!line.empty()) saw_content = true;
    if (!line.empty() && line[0] == '>') {
      std::size_t ws = line.find_first_of(" \t");
      std::string id = line.substr(1, ws == std::string::npos ? std::string::npos : ws - 1);
      if (id.empty()) throw ParseError("FASTA record with empty id", line_no);
      records.push_back({id, "", line_no, 0});
    } else if (!line.empty()) {
      if (records.empty())
        throw ParseError("sequence data before first '>' header", line_no);
      RawRecord& rec = records.back();
      if (rec.body.empty()) rec.first_body_line = line_no;
      for (char c : line) {
        if (c == ' ' || c == '\t') continue;
        bool letter = std::isalpha(static_cast<unsigned char>(c)) != 0;
        if (!letter && !is_gap(c))
          throw ParseError(std::string("illegal character '") + c + "' in sequence", line_no);
        rec.body.push_back(c);
      }
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  if (!saw_content) throw ParseError("empty FASTA input");
  if (records.empty()) throw ParseError("no FASTA records found");
  return records;
}

void check_unique_ids(const std::vector<RawRecord>& records) {
  std::unordered_set<std::string> seen;
  for (const RawRecord& r : records)
    if (!seen.insert(r.id).second)
      throw ParseError("duplicate sequence id '" + r.id + "'", r.header_line);
}

}  // namespace

int amino_index(char c) {
  switch (c) {
    case 'A': return 0;  case 'C': return 1;  case 'D': return 2;  case 'E': return 3;
    case 'F': return 4;  case 'G': return 5;  case 'H': return 6;  case 'I': return 7;
    case 'K': return 8;  case 'L': return 9;  case 'M': return 10; case 'N': return 11;
    case 'P': return 12; case 'Q': return 13; case 'R': return 14; case 'S': return 15;
    case 'T': return 16; case 'V': return 17; case 'W': return 18; case 'Y': return 19;
    default: return -1;
  }
}

bool is_gap(char c) { return c == '-' || c == '.'; }

std::size_t AlignedFamily::query_ungapped_length() const {
  const std::string& q = query();
  return static_cast<std::size_t>(
      std::count_if(q.begin(), q.end(), [](char c) { return !is_gap(c); }));
}

const std::vector<TagSpec>& builtin_tags() {
  static const std::vector<TagSpec> tags = {
      {"his6", "HHHHHH", Terminus::N},
      {"hsv", "QPELAPEDPED", Terminus::C},
  };
  return tags;
}

std::optional<TagSpec> find_builtin_tag(const std::string& name) {
  for (const TagSpec& t : builtin_tags())
    if (t.name == name) return t;
  return std::nullopt;
}

std::vector<ProteinSequence> parse_fasta(const std::string& text) {
  std::vector<RawRecord> records = scan_records(text);
  check_unique_ids(records);
  std::vector<ProteinSequence> out;
  out.reserve(records.size());
  for (const RawRecord& rec : records) {
    ProteinSequence seq;
    seq.id = rec.id;
    seq.residues.reserve(rec.body.size());
    for (char c : rec.body) {
      if (is_gap(c)) continue;  // gaps are legal input but not residues
      seq.residues.push_back(normalize_residue(c));
    }
    if (seq.residues.empty())
      throw ParseError("record '" + rec.id + "' has an empty sequence", rec.header_line);
    out.push_back(std::move(seq));
  }
  return out;
}

std::string write_fasta(const std::vector<ProteinSequence>& seqs) {
  std::string out;
  for (const ProteinSequence& s : seqs) {
    out += '>';
    out += s.id;
    out += '\n';
    for (std::size_t i = 0; i < s.residues.size(); i += 60) {
      out.append(s.residues, i, std::min<std::size_t>(60, s.residues.size() - i));
      out += '\n';
    }
  }
  return out;
}

AlignedFamily parse_aligned_fasta(const std::string& text) {
  std::vector<RawRecord> records = scan_records(text);
  check_unique_ids(records);
  AlignedFamily family;
  family.query_index = 0;
  for (const RawRecord& rec : records) {
    std::string row;
    row.reserve(rec.body.size());
    for (char c : rec.body) {
      if (std::islower(static_cast<unsigned char>(c))) continue;  // insertion state
      if (is_gap(c)) {
        row.push_back('-');
      } else {
        row.push_back(normalize_residue(c));
      }
    }
    family.rows.push_back(std::move(row));
    family.ids.push_back(rec.id);
  }
  std::vector<std::string> offenders;
  for (std::size_t i = 1; i < family.rows.size(); ++i)
    if (family.rows[i].size() != family.rows[0].size()) offenders.push_back(family.ids[i]);
  if (!offenders.empty()) {
    std::string msg = "aligned records differ in length from query '" + family.ids[0] + "':";
    for (const std::string& id : offenders) msg += " " + id;
    throw ParseError(msg);
  }
  if (family.query_ungapped_length() == 0)
    throw ParseError("query row '" + family.ids[0] + "' contains only gaps");
  return family;
}

ProteinSequence apply_tag(const ProteinSequence& seq, const TagSpec& tag) {
  ProteinSequence out;
  out.id = seq.id + "|tag:" + tag.name;
  if (tag.terminus == Terminus::N) {
    out.residues = tag.residues + seq.residues;
  } else {
    out.residues = seq.residues + tag.residues;
  }
  return out;
}

ProteinSequence simulate_ortholog(const ProteinSequence& seq, double identity,
                                  const std::set<std::size_t>& protect, Rng& rng) {
  if (!(identity > 0.0 && identity <= 1.0))
    throw DataError("ortholog identity must lie in (0, 1]");
  const std::size_t n = seq.size();
  const auto m = static_cast<std::size_t>(std::llround((1.0 - identity) * static_cast<double>(n)));

  std::vector<std::size_t> allowed;
  allowed.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!protect.count(i)) allowed.push_back(i);
  if (m > allowed.size())
    throw DataError("cannot place " + std::to_string(m) + " mutations in '" + seq.id +
                    "': only " + std::to_string(allowed.size()) + " unprotected positions");

  // Partial Fisher-Yates: the first m entries become the mutation sites.
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(allowed.size() - i));
    std::swap(allowed[i], allowed[j]);
  }

  ProteinSequence out = seq;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t pos = allowed[i];
    char cur = out.residues[pos];
    int cur_idx = amino_index(cur);
    // Draw from the 19 alternatives; 'X' can become any of the 20.
    if (cur_idx < 0) {
      out.residues[pos] = kAminoAcids[rng.next_below(kAlphabetSize)];
    } else {
      auto r = static_cast<int>(rng.next_below(kAlphabetSize - 1));
      if (r >= cur_idx) ++r;
      out.residues[pos] = kAminoAcids[r];
    }
  }
  return out;
}

}  // namespace ecpipe::seqio
