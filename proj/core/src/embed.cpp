#include "ecpipe/embed.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "ecpipe/error.hpp"
#include "ecpipe/rng.hpp"

namespace ecpipe::embed {
namespace {

constexpr char kMagic[4] = {'S', 'L', 'E', 'B'};
constexpr std::uint8_t kVersion = 0x01;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::vector<char>& blob) : blob_(blob) {}

  std::size_t pos() const { return pos_; }

  void need(std::size_t n) {
    if (pos_ + n > blob_.size()) throw FormatError("truncated SLEB container");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(blob_[pos_++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    std::memcpy(&v, blob_.data() + pos_, 2);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    std::memcpy(&v, blob_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    std::memcpy(&v, blob_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(blob_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const std::vector<char>& blob_;
  std::size_t pos_ = 0;
};

}  // namespace

Matrix EmbeddingMatrix::as_matrix() const {
  Matrix m(n_residues(), dim);
  for (std::size_t i = 0; i < values.size(); ++i) m.a[i] = static_cast<double>(values[i]);
  return m;
}

void write_store(const std::vector<EmbeddingMatrix>& matrices,
                 const std::filesystem::path& path) {
  std::uint32_t dim = matrices.empty() ? 0 : matrices[0].dim;
  std::unordered_set<std::string> seen;
  for (const EmbeddingMatrix& m : matrices) {
    if (m.dim != dim)
      throw DataError("embedding dim mismatch for '" + m.protein_id + "': " +
                      std::to_string(m.dim) + " vs " + std::to_string(dim));
    if (m.dim == 0) throw DataError("embedding dim must be positive");
    if (!seen.insert(m.protein_id).second)
      throw DataError("duplicate protein id '" + m.protein_id + "'");
    if (m.protein_id.size() > 0xFFFF)
      throw DataError("protein id too long: '" + m.protein_id.substr(0, 32) + "...'");
    if (m.values.size() % m.dim != 0)
      throw DataError("embedding value count not a multiple of dim for '" + m.protein_id + "'");
  }

  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  put_u32(out, dim);
  put_u64(out, matrices.size());
  for (const EmbeddingMatrix& m : matrices) {
    put_u16(out, static_cast<std::uint16_t>(m.protein_id.size()));
    out += m.protein_id;
    put_u32(out, static_cast<std::uint32_t>(m.n_residues()));
    std::size_t payload = m.values.size() * sizeof(float);
    std::size_t at = out.size();
    out.resize(at + payload);
    std::memcpy(out.data() + at, m.values.data(), payload);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  EmbeddingStore store;
  f.seekg(0, std::ios::end);
  store.blob_.resize(static_cast<std::size_t>(f.tellg()));
  f.seekg(0);
  f.read(store.blob_.data(), static_cast<std::streamsize>(store.blob_.size()));
  if (!f) throw DataError("read failed for '" + path.string() + "'");

  Reader r(store.blob_);
  std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw FormatError("bad magic in '" + path.string() + "': not a SLEB container");
  std::uint8_t version = r.u8();
  if (version != kVersion)
    throw FormatError("unsupported SLEB version " + std::to_string(version));
  store.dim_ = r.u32();
  std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint16_t id_len = r.u16();
    std::string id = r.bytes(id_len);
    std::uint32_t n_res = r.u32();
    Entry entry{r.pos(), n_res};
    r.skip(static_cast<std::size_t>(n_res) * store.dim_ * sizeof(float));
    if (!store.index_.emplace(id, entry).second)
      throw FormatError("duplicate protein id '" + id + "' in container");
    store.order_.push_back(std::move(id));
  }
  if (r.pos() != store.blob_.size())
    throw FormatError("trailing bytes after last record in '" + path.string() + "'");
  return store;
}

std::size_t EmbeddingStore::n_residues(const std::string& protein_id) const {
  auto it = index_.find(protein_id);
  if (it == index_.end()) throw DataError("protein '" + protein_id + "' not in store");
  return it->second.n_residues;
}

EmbeddingMatrix EmbeddingStore::lookup(const std::string& protein_id) const {
  auto it = index_.find(protein_id);
  if (it == index_.end()) throw DataError("protein '" + protein_id + "' not in store");
  EmbeddingMatrix m;
  m.protein_id = protein_id;
  m.dim = dim_;
  std::size_t n_floats = static_cast<std::size_t>(it->second.n_residues) * dim_;
  m.values.resize(n_floats);
  std::memcpy(m.values.data(), blob_.data() + it->second.offset, n_floats * sizeof(float));
  return m;
}

std::size_t synth_signal_coordinate(std::uint64_t seed, std::uint32_t dim) {
  return 1 + static_cast<std::size_t>(splitmix64_mix(seed) % (dim - 1));
}

EmbeddingMatrix synth_embed(const seqio::ProteinSequence& seq, std::uint32_t dim,
                            std::uint64_t seed, const std::set<std::size_t>& functional_positions,
                            double signal) {
  if (dim < 2) throw DataError("synth_embed requires dim >= 2");
  EmbeddingMatrix m;
  m.protein_id = seq.id;
  m.dim = dim;
  m.values.resize(seq.size() * dim);

  const double scale = std::sqrt(3.0);  // (sum of 4 uniforms - 2) has variance 1/3
  const std::size_t sig_coord = synth_signal_coordinate(seed, dim);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    auto code = static_cast<std::uint64_t>(static_cast<unsigned char>(seq.residues[i]));
    Rng row_rng(splitmix64_mix(seed ^ (code << 32) ^ static_cast<std::uint64_t>(i % 8)));
    for (std::uint32_t d = 0; d < dim; ++d) {
      double s = row_rng.next_unit() + row_rng.next_unit() + row_rng.next_unit() +
                 row_rng.next_unit() - 2.0;
      m.values[i * dim + d] = static_cast<float>(s * scale);
    }
    if (functional_positions.count(i)) {
      m.values[i * dim + 0] += static_cast<float>(signal);
      m.values[i * dim + sig_coord] += static_cast<float>(signal);
    }
  }
  return m;
}

}  // namespace ecpipe::embed
