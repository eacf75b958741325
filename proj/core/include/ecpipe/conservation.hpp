#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ecpipe/rng.hpp"
#include "ecpipe/seqio.hpp"

namespace ecpipe::cons {

/// Per-column distribution over the 20 canonical amino acids. Gaps and 'X'
/// never enter the counts; a column with no canonical residue at all is
/// flagged empty instead of carrying a distribution.
struct ColumnDistribution {
  std::array<double, seqio::kAlphabetSize> probs{};
  bool empty = false;
};

/// Shannon entropy (nats) of each query residue position, with a validity
/// mask for positions whose column held no canonical residues.
struct EntropyProfile {
  std::string protein_id;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return values.size(); }
};

enum class LabelSource { Curated, Pseudo };

/// Binary per-position labels for one protein.
struct ResidueLabelSet {
  std::string protein_id;
  std::vector<std::uint8_t> labels;
  LabelSource source = LabelSource::Curated;

  std::size_t size() const { return labels.size(); }
};

/// One (protein, position) training example with its binary label.
struct ResidueRef {
  std::string protein_id;
  std::size_t position = 0;
  std::uint8_t label = 0;

  bool operator==(const ResidueRef&) const = default;
};

struct BinaryMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision/recall/F1 with the 0-denominator convention: any undefined
/// ratio is reported as 0.
BinaryMetrics binary_metrics(std::size_t tp, std::size_t fp, std::size_t fn);

ColumnDistribution column_distribution(const seqio::AlignedFamily& family, std::size_t column);

/// -sum p ln p over the 20 amino acids, with 0 ln 0 := 0. Throws DataError
/// for an empty-flagged distribution; the caller masks that position.
double column_entropy(const ColumnDistribution& dist);

/// Entropy at every non-gap query position, in query order. Profile length
/// equals the query's ungapped length.
EntropyProfile entropy_profile(const seqio::AlignedFamily& family);

/// Mark the max(1, ceil(fraction * n_valid)) valid positions with the lowest
/// entropy as functional. Ties break toward the lower position index; masked
/// positions are always 0.
ResidueLabelSet pseudo_label(const EntropyProfile& profile, double fraction = 0.10);

/// Keep every positive and subsample the negatives, uniformly without
/// replacement, down to the positive count. Deterministic given the
/// generator state.
std::vector<ResidueRef> balance_pseudo_dataset(const std::vector<ResidueLabelSet>& labels,
                                               Rng& rng);

/// Micro-aggregated positive-class precision/recall/F1 of a pseudo-label
/// policy against curated truth. Proteins are matched by id.
BinaryMetrics evaluate_policy(const std::vector<ResidueLabelSet>& pseudo,
                              const std::vector<ResidueLabelSet>& truth);

}  // namespace ecpipe::cons
