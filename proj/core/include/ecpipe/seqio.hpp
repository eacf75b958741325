#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ecpipe/rng.hpp"

namespace ecpipe::seqio {

/// The 20 canonical amino acids in alphabetical one-letter order.
inline constexpr char kAminoAcids[] = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr std::size_t kAlphabetSize = 20;

/// Index of a canonical amino acid in kAminoAcids, or -1 for anything else
/// (wildcard 'X', gaps, junk).
int amino_index(char c);

bool is_gap(char c);

/// Validated protein sequence: canonical residues plus the wildcard 'X'.
struct ProteinSequence {
  std::string id;
  std::string residues;

  std::size_t size() const { return residues.size(); }
};

/// Equal-length aligned rows over {20 amino acids, 'X', '-'}. The first
/// record of an alignment file is the query by convention.
struct AlignedFamily {
  std::size_t query_index = 0;
  std::vector<std::string> rows;
  std::vector<std::string> ids;

  std::size_t aligned_length() const { return rows.empty() ? 0 : rows[0].size(); }
  const std::string& query() const { return rows[query_index]; }
  const std::string& query_id() const { return ids[query_index]; }
  /// Number of non-gap characters in the query row.
  std::size_t query_ungapped_length() const;
};

enum class Terminus { N, C };

/// A peptide tag appended to one terminus of a protein.
struct TagSpec {
  std::string name;
  std::string residues;
  Terminus terminus = Terminus::N;
};

/// Built-in tags. His6 and HSV are the common laboratory tags; anything
/// else comes in through configuration.
const std::vector<TagSpec>& builtin_tags();
std::optional<TagSpec> find_builtin_tag(const std::string& name);

/// Parse plain FASTA. Header token before the first whitespace is the id;
/// sequence lines are concatenated; lowercase is uppercased; the ambiguity
/// codes B/Z/U/O/J map to 'X'; gap characters are dropped. Throws
/// ParseError with a line number on illegal characters, empty records,
/// empty input or duplicate ids.
std::vector<ProteinSequence> parse_fasta(const std::string& text);

/// Serialize sequences as FASTA (60-column wrap). parse_fasta(write_fasta(x))
/// reproduces x exactly.
std::string write_fasta(const std::vector<ProteinSequence>& seqs);

/// Parse an aligned FASTA / A2M file. '.' and '-' both denote gaps and are
/// normalized to '-'; lowercase letters are insertion states and are deleted
/// before the length check. All records must have equal post-normalization
/// length; the first record is the query.
AlignedFamily parse_aligned_fasta(const std::string& text);

/// Prepend (N) or append (C) the tag residues; the id gains a
/// "|tag:<name>" suffix.
ProteinSequence apply_tag(const ProteinSequence& seq, const TagSpec& tag);

/// Substitute exactly round((1-identity)*n) positions outside `protect`
/// with a uniformly random different amino acid. Deterministic given the
/// generator state. Throws DataError when the mutation count cannot be
/// placed outside the protected set.
ProteinSequence simulate_ortholog(const ProteinSequence& seq, double identity,
                                  const std::set<std::size_t>& protect, Rng& rng);

}  // namespace ecpipe::seqio
