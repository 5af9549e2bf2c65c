#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "mve/error.hpp"
#include "mve/index.hpp"

namespace mve {
namespace {

constexpr char kIndexMagic[4] = {'M', 'V', 'I', 'X'};
constexpr char kDumpMagic[4] = {'M', 'V', 'E', 'D'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  template <typename T>
  void uint(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(T));
  }

  void floats(std::span<const float> values) {
    for (float f : values) uint(std::bit_cast<std::uint32_t>(f));
  }

  void string(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

/// Bounds-checked cursor over an in-memory file image. Every read names the
/// section it belongs to so failures point at the broken part of the file.
class Cursor {
 public:
  explicit Cursor(std::string image) : image_(std::move(image)) {}

  void section(std::string name) { section_ = std::move(name); }
  const std::string& section() const noexcept { return section_; }
  std::size_t remaining() const noexcept { return image_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what) const { throw CorruptIndex(section_, what); }

  void need(std::uint64_t n) const {
    if (n > remaining()) {
      fail("truncated: needs " + std::to_string(n) + " more bytes, " +
           std::to_string(remaining()) + " left");
    }
  }

  template <typename T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(image_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  void floats(std::span<float> out) {
    need(std::uint64_t{out.size()} * 4);
    for (float& f : out) {
      f = std::bit_cast<float>(uint<std::uint32_t>());
      if (!std::isfinite(f)) fail("non-finite value");
    }
  }

  std::string string() {
    const auto len = uint<std::uint32_t>();
    need(len);
    std::string s = image_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  void magic(const char (&expected)[4]) {
    need(4);
    if (std::memcmp(image_.data() + pos_, expected, 4) != 0) fail("bad magic bytes");
    pos_ += 4;
  }

 private:
  std::string image_;
  std::size_t pos_ = 0;
  std::string section_ = "header";
};

std::string slurp(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

void save_index(const IvfIndex& index, std::ostream& out) {
  const EmbeddingStore& store = index.store();
  Writer w(out);
  w.bytes(kIndexMagic, 4);
  w.uint(kFormatVersion);
  w.uint(static_cast<std::uint32_t>(index.dim()));
  w.uint(static_cast<std::uint32_t>(index.n_list()));
  w.uint(static_cast<std::uint64_t>(store.num_docs()));
  w.uint(static_cast<std::uint64_t>(store.num_embeddings()));
  for (DocNo d = 0; d < store.num_docs(); ++d) {
    w.string(store.doc_id(d));
    w.uint(store.spans()[d].start);
    w.uint(store.spans()[d].length);
  }
  w.floats(index.centroids().vectors);
  for (const auto& list : index.lists()) {
    w.uint(static_cast<std::uint64_t>(list.size()));
    for (std::size_t i = 0; i < list.size(); ++i) {
      w.uint(list.ids[i]);
      w.floats(std::span<const float>(list.vectors).subspan(i * index.dim(), index.dim()));
    }
  }
  if (!out) throw InvalidInput("failed to write index");
}

void save_index(const IvfIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  save_index(index, out);
}

IvfIndex load_index(std::istream& in) {
  Cursor c(slurp(in));

  c.section("header");
  c.magic(kIndexMagic);
  if (const auto version = c.uint<std::uint32_t>(); version != kFormatVersion) {
    c.fail("unsupported version " + std::to_string(version));
  }
  const auto dim = c.uint<std::uint32_t>();
  const auto n_list = c.uint<std::uint32_t>();
  const auto num_docs = c.uint<std::uint64_t>();
  const auto num_embeddings = c.uint<std::uint64_t>();
  if (dim == 0) c.fail("dim is 0");
  if (n_list == 0) c.fail("n_list is 0");
  if (num_docs == 0 || num_docs > num_embeddings) c.fail("inconsistent document/embedding counts");
  // each embedding occupies at least 8 + 4*dim bytes in the list block
  if (num_embeddings > c.remaining() / (8 + 4 * std::uint64_t{dim})) {
    c.section("lists");
    c.fail("truncated: header declares " + std::to_string(num_embeddings) +
           " embeddings, file is too short to hold them");
  }

  c.section("doc table");
  struct DocRow {
    std::string name;
    std::uint64_t start;
    std::uint32_t length;
  };
  std::vector<DocRow> docs;
  docs.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(num_docs, c.remaining() / 16)));
  std::unordered_set<std::string> names;
  std::uint64_t next_start = 0;
  for (std::uint64_t d = 0; d < num_docs; ++d) {
    DocRow row{c.string(), c.uint<std::uint64_t>(), c.uint<std::uint32_t>()};
    if (row.length == 0) c.fail("document '" + row.name + "' is empty");
    if (row.start != next_start) c.fail("document offsets do not partition the store");
    if (!names.insert(row.name).second) c.fail("duplicate doc_id '" + row.name + "'");
    next_start += row.length;
    docs.push_back(std::move(row));
  }
  if (next_start != num_embeddings) c.fail("document lengths do not sum to num_embeddings");

  c.section("centroids");
  Centroids centroids;
  centroids.dim = dim;
  c.need(std::uint64_t{n_list} * dim * 4);
  centroids.vectors.resize(std::size_t{n_list} * dim);
  c.floats(centroids.vectors);

  c.section("lists");
  std::vector<float> flat(num_embeddings * dim);
  std::vector<bool> seen(num_embeddings, false);
  std::vector<InvertedList> lists(n_list);
  std::uint64_t total = 0;
  for (auto& list : lists) {
    const auto count = c.uint<std::uint64_t>();
    if (count > num_embeddings - total) c.fail("lists hold more embeddings than declared");
    c.need(count * (8 + 4 * std::uint64_t{dim}));
    total += count;
    list.ids.resize(count);
    list.vectors.resize(count * dim);
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto id = c.uint<std::uint64_t>();
      if (id >= num_embeddings) c.fail("embedding id " + std::to_string(id) + " out of range");
      if (seen[id]) c.fail("embedding id " + std::to_string(id) + " appears twice");
      seen[id] = true;
      list.ids[i] = id;
      std::span<float> v(list.vectors.data() + i * dim, dim);
      c.floats(v);
      std::copy(v.begin(), v.end(), flat.begin() + static_cast<std::ptrdiff_t>(id * dim));
    }
  }
  if (total != num_embeddings) c.fail("lists hold fewer embeddings than declared");

  c.section("trailer");
  if (c.remaining() != 0) c.fail(std::to_string(c.remaining()) + " unexpected trailing bytes");

  auto store = std::make_shared<EmbeddingStore>(dim);
  for (auto& row : docs) {
    store->add_document(std::move(row.name),
                        std::span<const float>(flat).subspan(row.start * dim, std::size_t{row.length} * dim));
  }
  return IvfIndex(std::move(store), std::move(centroids), std::move(lists));
}

IvfIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptIndex("file", "cannot open '" + path + "'");
  return load_index(in);
}

void write_embedding_dump(std::span<const DocumentEntry> docs, std::ostream& out) {
  if (docs.empty()) throw InvalidInput("embedding dump needs at least one document");
  const std::size_t dim = docs.front().embeddings.empty() ? 0 : docs.front().embeddings.front().dim();
  Writer w(out);
  w.bytes(kDumpMagic, 4);
  w.uint(kFormatVersion);
  w.uint(static_cast<std::uint32_t>(dim));
  w.uint(static_cast<std::uint64_t>(docs.size()));
  for (const auto& doc : docs) {
    doc.validate();
    if (doc.embeddings.front().dim() != dim) throw InvalidInput("mixed dimensions in embedding dump");
    w.string(doc.doc_id);
    w.uint(static_cast<std::uint32_t>(doc.embeddings.size()));
    for (const auto& e : doc.embeddings) w.floats(e.values());
  }
}

std::vector<DocumentEntry> read_embedding_dump(std::istream& in) {
  try {
    Cursor c(slurp(in));
    c.magic(kDumpMagic);
    if (const auto version = c.uint<std::uint32_t>(); version != kFormatVersion) {
      c.fail("unsupported version " + std::to_string(version));
    }
    const auto dim = c.uint<std::uint32_t>();
    const auto num_docs = c.uint<std::uint64_t>();
    if (dim == 0) c.fail("dim is 0");
    if (num_docs == 0) c.fail("no documents");
    c.section("documents");
    std::vector<DocumentEntry> docs;
    std::unordered_set<std::string> names;
    for (std::uint64_t d = 0; d < num_docs; ++d) {
      DocumentEntry doc;
      doc.doc_id = c.string();
      if (!names.insert(doc.doc_id).second) c.fail("duplicate doc_id '" + doc.doc_id + "'");
      const auto n = c.uint<std::uint32_t>();
      if (n == 0) c.fail("document '" + doc.doc_id + "' has no embeddings");
      c.need(std::uint64_t{n} * dim * 4);
      doc.embeddings.reserve(n);
      for (std::uint32_t j = 0; j < n; ++j) {
        std::vector<float> v(dim);
        c.floats(v);
        doc.embeddings.emplace_back(std::move(v));
      }
      docs.push_back(std::move(doc));
    }
    c.section("trailer");
    if (c.remaining() != 0) c.fail("unexpected trailing bytes");
    return docs;
  } catch (const CorruptIndex& e) {
    throw InvalidInput(std::string("embedding dump: ") + e.what());
  }
}

std::vector<DocumentEntry> read_embedding_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open embedding dump '" + path + "'");
  return read_embedding_dump(in);
}

}  // namespace mve
