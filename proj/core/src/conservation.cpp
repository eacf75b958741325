#include "ecpipe/conservation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "ecpipe/error.hpp"

namespace ecpipe::cons {

BinaryMetrics binary_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  BinaryMetrics m;
  m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

ColumnDistribution column_distribution(const seqio::AlignedFamily& family, std::size_t column) {
  if (column >= family.aligned_length())
    throw DataError("column " + std::to_string(column) + " out of range (alignment length " +
                    std::to_string(family.aligned_length()) + ")");
  std::array<std::size_t, seqio::kAlphabetSize> counts{};
  std::size_t total = 0;
  for (const std::string& row : family.rows) {
    int idx = seqio::amino_index(row[column]);
    if (idx < 0) continue;  // gap or 'X'
    ++counts[static_cast<std::size_t>(idx)];
    ++total;
  }
  ColumnDistribution dist;
  if (total == 0) {
    dist.empty = true;
    return dist;
  }
  for (std::size_t a = 0; a < seqio::kAlphabetSize; ++a)
    dist.probs[a] = static_cast<double>(counts[a]) / static_cast<double>(total);
  return dist;
}

double column_entropy(const ColumnDistribution& dist) {
  if (dist.empty) throw DataError("entropy of an empty column distribution");
  double h = 0.0;
  for (double p : dist.probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

EntropyProfile entropy_profile(const seqio::AlignedFamily& family) {
  const std::string& query = family.query();
  EntropyProfile profile;
  profile.protein_id = family.query_id();
  for (std::size_t col = 0; col < query.size(); ++col) {
    if (seqio::is_gap(query[col])) continue;
    ColumnDistribution dist = column_distribution(family, col);
    if (dist.empty) {
      profile.values.push_back(0.0);
      profile.valid.push_back(0);
    } else {
      profile.values.push_back(column_entropy(dist));
      profile.valid.push_back(1);
    }
  }
  if (profile.values.empty())
    throw DataError("query row of '" + profile.protein_id + "' contains only gaps");
  return profile;
}

ResidueLabelSet pseudo_label(const EntropyProfile& profile, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw DataError("pseudo-label fraction must lie in (0, 1]");
  std::vector<std::size_t> valid_positions;
  for (std::size_t i = 0; i < profile.size(); ++i)
    if (profile.valid[i]) valid_positions.push_back(i);
  if (valid_positions.empty())
    throw DataError("no valid positions in entropy profile of '" + profile.protein_id + "'");

  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(fraction * static_cast<double>(valid_positions.size()))));
  std::stable_sort(valid_positions.begin(), valid_positions.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (profile.values[a] != profile.values[b])
                       return profile.values[a] < profile.values[b];
                     return a < b;
                   });

  ResidueLabelSet out;
  out.protein_id = profile.protein_id;
  out.source = LabelSource::Pseudo;
  out.labels.assign(profile.size(), 0);
  for (std::size_t i = 0; i < k && i < valid_positions.size(); ++i)
    out.labels[valid_positions[i]] = 1;
  return out;
}

std::vector<ResidueRef> balance_pseudo_dataset(const std::vector<ResidueLabelSet>& labels,
                                               Rng& rng) {
  std::vector<ResidueRef> positives;
  std::vector<ResidueRef> negatives;
  for (const ResidueLabelSet& set : labels) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      ResidueRef ref{set.protein_id, i, set.labels[i]};
      (set.labels[i] ? positives : negatives).push_back(ref);
    }
  }
  if (positives.empty()) throw DataError("cannot balance: no positive residues");
  if (negatives.empty()) throw DataError("cannot balance: no negative residues");

  std::vector<ResidueRef> out = positives;
  if (negatives.size() <= positives.size()) {
    out.insert(out.end(), negatives.begin(), negatives.end());
    return out;
  }
  // Partial Fisher-Yates selection of |positives| negatives.
  for (std::size_t i = 0; i < positives.size(); ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(negatives.size() - i));
    std::swap(negatives[i], negatives[j]);
    out.push_back(negatives[i]);
  }
  return out;
}

BinaryMetrics evaluate_policy(const std::vector<ResidueLabelSet>& pseudo,
                              const std::vector<ResidueLabelSet>& truth) {
  std::unordered_map<std::string, const ResidueLabelSet*> by_id;
  for (const ResidueLabelSet& t : truth) by_id[t.protein_id] = &t;
  if (by_id.size() != truth.size()) throw DataError("duplicate protein ids in truth labels");
  if (pseudo.size() != truth.size())
    throw DataError("pseudo/truth protein counts differ");

  std::size_t tp = 0, fp = 0, fn = 0;
  for (const ResidueLabelSet& p : pseudo) {
    auto it = by_id.find(p.protein_id);
    if (it == by_id.end())
      throw DataError("protein '" + p.protein_id + "' missing from truth labels");
    const ResidueLabelSet& t = *it->second;
    if (t.size() != p.size())
      throw DataError("label length mismatch for protein '" + p.protein_id + "'");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.labels[i] && t.labels[i]) ++tp;
      else if (p.labels[i] && !t.labels[i]) ++fp;
      else if (!p.labels[i] && t.labels[i]) ++fn;
    }
  }
  return binary_metrics(tp, fp, fn);
}

}  // namespace ecpipe::cons
