#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecpipe/matrix.hpp"
#include "ecpipe/seqio.hpp"

namespace ecpipe::embed {

/// Per-residue embedding matrix (n_residues x dim, 32-bit reals, row-major).
struct EmbeddingMatrix {
  std::string protein_id;
  std::uint32_t dim = 0;
  std::vector<float> values;

  std::size_t n_residues() const { return dim ? values.size() / dim : 0; }
  const float* row(std::size_t i) const { return values.data() + i * dim; }

  /// Widen to doubles for training arithmetic.
  Matrix as_matrix() const;
};

/// Read-only view of a "SLEB" container. The file is loaded once on open;
/// lookups slice the in-memory payload.
class EmbeddingStore {
 public:
  static EmbeddingStore open(const std::filesystem::path& path);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return order_.size(); }
  bool contains(const std::string& protein_id) const { return index_.count(protein_id) > 0; }
  /// Ids in file order.
  const std::vector<std::string>& ids() const { return order_; }
  std::size_t n_residues(const std::string& protein_id) const;
  EmbeddingMatrix lookup(const std::string& protein_id) const;

 private:
  struct Entry {
    std::size_t offset = 0;  // byte offset of the float payload
    std::uint32_t n_residues = 0;
  };
  std::vector<char> blob_;
  std::unordered_map<std::string, Entry> index_;
  std::vector<std::string> order_;
  std::uint32_t dim_ = 0;
};

/// Write a SLEB container:
///   magic "SLEB", version 0x01, u32 dim, u64 count, then per protein
///   u16 id byte length, id, u32 n_residues, n_residues*dim f32, all
///   little-endian. Validates uniform dim and unique ids before writing.
void write_store(const std::vector<EmbeddingMatrix>& matrices,
                 const std::filesystem::path& path);

/// Deterministic synthetic embedding with an optional planted signal. Row i
/// depends only on (seed, residue code at i, i mod 8); rows listed in
/// functional_positions additionally get `signal` added to coordinate 0 and
/// to coordinate 1 + splitmix64_mix(seed) mod (dim-1).
EmbeddingMatrix synth_embed(const seqio::ProteinSequence& seq, std::uint32_t dim,
                            std::uint64_t seed, const std::set<std::size_t>& functional_positions,
                            double signal);

/// The signal coordinate (other than 0) that synth_embed uses for a seed.
std::size_t synth_signal_coordinate(std::uint64_t seed, std::uint32_t dim);

}  // namespace ecpipe::embed
