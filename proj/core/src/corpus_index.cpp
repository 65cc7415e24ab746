#include "repro/corpus_index.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "match_engine.hpp"
#include "repro/unicode_norm.hpp"
#include "repro/utf8.hpp"

namespace repro::corpus {
namespace {

constexpr char kMagic[8] = {'R', 'P', 'R', 'O', 'I', 'D', 'X', '1'};
constexpr uint32_t kFormatVersion = 2;
constexpr uint32_t kFlagNfc = 1u << 0;
constexpr std::size_t kChecksumBytes = 32;
// u32 suffix arrays bound the shard text size; leave headroom under 4 GiB.
constexpr uint64_t kMaxShardBytes = (4ull << 30) - (64ull << 20);

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void put_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

// Sequential reader that hashes every byte it hands out, so the trailing
// checksum can be verified after a single pass.
class HashingReader {
 public:
  explicit HashingReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) fail("cannot open index file: " + path);
    std::error_code ec;
    file_bytes_ = std::filesystem::file_size(path, ec);
    if (ec) fail("cannot stat index file: " + path);
    if (file_bytes_ < kChecksumBytes) fail("corrupt index file (truncated): " + path);
    payload_bytes_ = file_bytes_ - kChecksumBytes;
  }

  void read(void* dst, std::size_t len) {
    if (consumed_ + len > payload_bytes_) {
      fail("corrupt index file (truncated payload)");
    }
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(in_.gcount()) != len) {
      fail("corrupt index file (short read)");
    }
    hash_.update(dst, len);
    consumed_ += len;
  }

  uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  uint64_t u64() {
    unsigned char b[8];
    read(b, 8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  uint64_t remaining() const { return payload_bytes_ - consumed_; }
  uint64_t file_bytes() const { return file_bytes_; }

  // Call once everything before the checksum has been consumed.
  void verify_checksum() {
    if (consumed_ != payload_bytes_) {
      fail("corrupt index file (unexpected trailing bytes)");
    }
    digest::Sha256 expected{};
    in_.read(reinterpret_cast<char*>(expected.data()), kChecksumBytes);
    if (static_cast<std::size_t>(in_.gcount()) != kChecksumBytes) {
      fail("corrupt index file (missing checksum)");
    }
    if (hash_.finish() != expected) {
      fail("corrupt index file (checksum mismatch)");
    }
  }

 private:
  std::ifstream in_;
  digest::Sha256Stream hash_;
  uint64_t file_bytes_ = 0;
  uint64_t payload_bytes_ = 0;
  uint64_t consumed_ = 0;
};

struct Header {
  uint32_t flags = 0;
  digest::Sha256 corpus_digest{};
  uint64_t doc_count = 0;
  uint64_t total_chars = 0;
  uint32_t shard_count = 0;
};

Header read_header(HashingReader& r) {
  char magic[8];
  r.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) fail("not a corpus index file");
  const uint32_t version = r.u32();
  if (version != kFormatVersion) {
    fail("index format version unsupported: " + std::to_string(version));
  }
  Header h;
  h.flags = r.u32();
  r.read(h.corpus_digest.data(), h.corpus_digest.size());
  h.doc_count = r.u64();
  h.total_chars = r.u64();
  h.shard_count = r.u32();
  return h;
}

void write_placeholder_header(std::ofstream& out) {
  out.write(kMagic, 8);
  put_u32(out, kFormatVersion);
  put_u32(out, 0);  // flags, patched later
  const char zeros[32 + 8 + 8 + 4] = {};
  out.write(zeros, sizeof(zeros));
}

void patch_header(std::ofstream& out, const Header& h) {
  out.seekp(12);  // past magic + version
  put_u32(out, h.flags);
  out.write(reinterpret_cast<const char*>(h.corpus_digest.data()),
            static_cast<std::streamsize>(h.corpus_digest.size()));
  put_u64(out, h.doc_count);
  put_u64(out, h.total_chars);
  put_u32(out, h.shard_count);
}

// Suffix array entries are positions below text_len, so this many bits per
// entry round-trips them exactly.
uint32_t sa_pack_width(uint64_t text_len) {
  return text_len <= 1 ? 1u : static_cast<uint32_t>(std::bit_width(text_len - 1));
}

// First half of a shard: lengths plus the bit-packed suffix array. Packing
// at ceil(log2(text_len)) bits per entry shaves roughly an eighth off the
// dominant on-disk cost compared to raw u32 entries.
void write_shard_prefix(std::ofstream& out, const detail::Shard& shard) {
  const uint64_t text_len = shard.text.size();
  put_u64(out, text_len);
  put_u64(out, shard.sa.size());

  const uint32_t width = sa_pack_width(text_len);
  std::vector<unsigned char> buf;
  buf.reserve(4 << 20);
  uint64_t bitbuf = 0;
  int bits = 0;
  for (uint32_t v : shard.sa) {
    bitbuf |= static_cast<uint64_t>(v) << bits;
    bits += static_cast<int>(width);
    while (bits >= 8) {
      buf.push_back(static_cast<unsigned char>(bitbuf & 0xFF));
      bitbuf >>= 8;
      bits -= 8;
      if (buf.size() == (4u << 20)) {
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
        buf.clear();
      }
    }
  }
  if (bits > 0) buf.push_back(static_cast<unsigned char>(bitbuf & 0xFF));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) fail("write error while emitting index shard");
}

// Second half: zlib-compressed text and the document table. Split from the
// prefix so the build can drop the suffix array before the compression
// buffer is allocated, keeping the peak at text + suffix array.
void write_shard_suffix(std::ofstream& out, const detail::Shard& shard) {
  const uint64_t text_len = shard.text.size();
  uLong comp_cap = compressBound(static_cast<uLong>(text_len));
  std::vector<unsigned char> comp(comp_cap);
  uLongf comp_len = comp_cap;
  int rc = compress2(comp.data(), &comp_len,
                     reinterpret_cast<const Bytef*>(shard.text.data()),
                     static_cast<uLong>(text_len), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) fail("zlib compression failed while writing index");
  put_u64(out, comp_len);
  out.write(reinterpret_cast<const char*>(comp.data()),
            static_cast<std::streamsize>(comp_len));
  comp.clear();
  comp.shrink_to_fit();

  put_u64(out, shard.docs.size());
  for (const auto& d : shard.docs) {
    put_u64(out, d.start);
    put_u64(out, d.chars);
    put_u32(out, static_cast<uint32_t>(d.id.size()));
    out.write(d.id.data(), static_cast<std::streamsize>(d.id.size()));
  }
  if (!out) fail("write error while emitting index shard");
}

// Reads one shard; when `keep_payload` is false the payload is consumed
// (and hashed) but not retained, which is all `verify` needs.
detail::Shard read_shard(HashingReader& r, bool keep_payload) {
  detail::Shard shard;
  const uint64_t text_len = r.u64();
  if (text_len > kMaxShardBytes) fail("corrupt index file (shard too large)");

  const uint64_t sa_len = r.u64();
  if (sa_len != text_len) fail("corrupt index file (suffix array length mismatch)");
  const uint32_t width = sa_pack_width(text_len);
  const uint64_t packed_bytes = (sa_len * width + 7) / 8;
  if (packed_bytes > r.remaining()) {
    fail("corrupt index file (truncated suffix array)");
  }
  shard.sa.resize(sa_len);
  {
    const uint64_t mask = width >= 64 ? ~0ull : (1ull << width) - 1;
    std::vector<unsigned char> chunk(4 << 20);
    uint64_t bitbuf = 0;
    int bits = 0;
    uint64_t written = 0;
    uint64_t left = packed_bytes;
    while (left > 0) {
      const std::size_t take =
          static_cast<std::size_t>(std::min<uint64_t>(chunk.size(), left));
      r.read(chunk.data(), take);
      left -= take;
      for (std::size_t i = 0; i < take; ++i) {
        bitbuf |= static_cast<uint64_t>(chunk[i]) << bits;
        bits += 8;
        while (bits >= static_cast<int>(width) && written < sa_len) {
          shard.sa[written++] = static_cast<uint32_t>(bitbuf & mask);
          bitbuf >>= width;
          bits -= static_cast<int>(width);
        }
      }
    }
    if (written != sa_len) fail("corrupt index file (truncated suffix array)");
  }

  const uint64_t comp_len = r.u64();
  if (comp_len > r.remaining()) fail("corrupt index file (truncated text)");
  std::vector<unsigned char> comp(comp_len);
  r.read(comp.data(), comp_len);
  shard.text.resize(text_len);
  uLongf dest_len = static_cast<uLongf>(text_len);
  int rc = uncompress(reinterpret_cast<Bytef*>(shard.text.data()), &dest_len,
                      comp.data(), static_cast<uLong>(comp_len));
  if (rc != Z_OK || dest_len != text_len) {
    fail("corrupt index file (text decompression failed)");
  }
  comp.clear();
  comp.shrink_to_fit();

  const uint64_t ndocs = r.u64();
  // Each serialized entry takes at least 20 bytes, which bounds a sane count.
  if (ndocs > r.remaining() / 20 + 1) {
    fail("corrupt index file (document table too large)");
  }
  if (keep_payload) shard.docs.reserve(ndocs);
  for (uint64_t i = 0; i < ndocs; ++i) {
    detail::DocMeta d;
    d.start = r.u64();
    d.chars = r.u64();
    const uint32_t id_len = r.u32();
    if (id_len > r.remaining()) fail("corrupt index file (truncated doc id)");
    d.id.resize(id_len);
    r.read(d.id.data(), id_len);
    if (d.start > text_len) fail("corrupt index file (doc offset out of range)");
    if (keep_payload) shard.docs.push_back(std::move(d));
  }

  for (uint32_t v : shard.sa) {
    if (v >= text_len) fail("corrupt index file (suffix array entry out of range)");
  }
  if (!keep_payload) {
    shard.text.clear();
    shard.sa.clear();
  }
  return shard;
}

void append_checksum(const std::string& path) {
  digest::Sha256Stream hash;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot reopen index file for checksumming: " + path);
    std::vector<char> buf(8 << 20);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      hash.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  const digest::Sha256 sum = hash.finish();
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out.write(reinterpret_cast<const char*>(sum.data()),
            static_cast<std::streamsize>(sum.size()));
  if (!out) fail("write error while appending index checksum");
}

}  // namespace

std::optional<Document> VectorDocumentSource::next() {
  if (pos_ >= docs_.size()) return std::nullopt;
  return std::move(docs_[pos_++]);
}

DirectoryDocumentSource::DirectoryDocumentSource(const std::string& root)
    : root_(root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root_)) {
    fail("corpus directory not found: " + root_);
  }
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    if (entry.is_regular_file()) {
      rel_paths_.push_back(
          fs::relative(entry.path(), root_).generic_string());
    }
  }
  std::sort(rel_paths_.begin(), rel_paths_.end());
}

std::optional<Document> DirectoryDocumentSource::next() {
  if (pos_ >= rel_paths_.size()) return std::nullopt;
  Document d;
  d.doc_id = rel_paths_[pos_++];
  const std::string full = root_ + "/" + d.doc_id;
  std::ifstream in(full, std::ios::binary);
  if (!in) fail("cannot read corpus file: " + full);
  std::ostringstream ss;
  ss << in.rdbuf();
  d.content = std::move(ss).str();
  return d;
}

struct JsonlDocumentSource::State {
  std::ifstream in;
  uint64_t line_no = 0;
};

JsonlDocumentSource::JsonlDocumentSource(const std::string& path)
    : state_(std::make_unique<State>()) {
  state_->in.open(path, std::ios::binary);
  if (!state_->in) fail("cannot open corpus record file: " + path);
}

JsonlDocumentSource::~JsonlDocumentSource() = default;

std::optional<Document> JsonlDocumentSource::next() {
  std::string line;
  for (;;) {
    if (!std::getline(state_->in, line)) return std::nullopt;
    ++state_->line_no;
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(state_->line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      fail(where + ": malformed corpus record");
    }
    if (!j.contains("doc_id") || !j["doc_id"].is_string()) {
      fail(where + ": missing required field doc_id");
    }
    if (!j.contains("content") || !j["content"].is_string()) {
      fail(where + ": missing required field content");
    }
    Document d;
    d.doc_id = j["doc_id"].get<std::string>();
    d.content = j["content"].get<std::string>();
    return d;
  }
}

BuildResult build_index(DocumentSource& documents, const std::string& index_path,
                        const IndexBuildOptions& options) {
  if (options.target_shard_bytes == 0 ||
      options.target_shard_bytes > kMaxShardBytes) {
    fail("target_shard_bytes out of range");
  }

  std::ofstream out(index_path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot create index file: " + index_path);
  write_placeholder_header(out);

  Header header;
  header.flags = options.normalize_nfc ? kFlagNfc : 0;

  digest::Sha256Stream corpus_hash;
  corpus_hash.update_u64(options.normalize_nfc ? 1 : 0);

  BuildResult result;
  detail::Shard shard;
  shard.text.reserve(std::min<uint64_t>(options.target_shard_bytes, 1 << 20));

  auto finalize_shard = [&] {
    if (shard.text.empty()) return;
    // Return the accumulation slack before the suffix array (4x the text) is
    // allocated, and drop the array again before the compression buffer; the
    // build then peaks at text + suffix array + construction scratch.
    shard.text.shrink_to_fit();
    shard.build_suffix_array_and_buckets();
    write_shard_prefix(out, shard);
    shard.release_suffix_array();
    write_shard_suffix(out, shard);
    ++header.shard_count;
    shard = detail::Shard{};
  };

  for (;;) {
    std::optional<Document> doc;
    try {
      doc = documents.next();
    } catch (const std::exception& e) {
      if (options.strict) throw;
      result.skipped.push_back({"", e.what()});
      continue;
    }
    if (!doc) break;

    if (!utf8::is_valid(doc->content)) {
      if (options.strict) {
        fail("document is not valid UTF-8: " + doc->doc_id);
      }
      result.skipped.push_back({doc->doc_id, "document is not valid UTF-8"});
      continue;
    }
    std::string content = options.normalize_nfc ? norm::nfc(doc->content)
                                                : std::move(doc->content);
    if (content.size() + 1 > kMaxShardBytes) {
      fail("document exceeds maximum shard size: " + doc->doc_id);
    }

    corpus_hash.update_u64(doc->doc_id.size());
    corpus_hash.update(doc->doc_id);
    corpus_hash.update_u64(content.size());
    corpus_hash.update(content);

    const uint64_t chars = utf8::char_count(content);
    header.doc_count += 1;
    header.total_chars += chars;

    if (!shard.text.empty() &&
        shard.text.size() + content.size() + 1 > options.target_shard_bytes) {
      finalize_shard();
    }
    shard.docs.push_back({shard.text.size(), chars, doc->doc_id});
    shard.text += content;
    shard.text += '\xff';
  }
  finalize_shard();

  header.corpus_digest = corpus_hash.finish();
  patch_header(out, header);
  out.close();
  if (!out) fail("write error while finalizing index file");
  append_checksum(index_path);

  result.corpus_digest = header.corpus_digest;
  result.doc_count = header.doc_count;
  result.total_chars = header.total_chars;
  result.shard_count = header.shard_count;
  result.index_file_bytes = std::filesystem::file_size(index_path);
  return result;
}

struct CorpusIndex::Impl {
  Header header;
  std::vector<detail::Shard> shards;
};

CorpusIndex::CorpusIndex() : impl_(std::make_unique<Impl>()) {}
CorpusIndex::CorpusIndex(CorpusIndex&&) noexcept = default;
CorpusIndex& CorpusIndex::operator=(CorpusIndex&&) noexcept = default;
CorpusIndex::~CorpusIndex() = default;

CorpusIndex CorpusIndex::load(const std::string& path) {
  HashingReader r(path);
  CorpusIndex ix;
  ix.impl_->header = read_header(r);
  ix.impl_->shards.reserve(ix.impl_->header.shard_count);
  for (uint32_t s = 0; s < ix.impl_->header.shard_count; ++s) {
    ix.impl_->shards.push_back(read_shard(r, /*keep_payload=*/true));
  }
  r.verify_checksum();
  for (auto& shard : ix.impl_->shards) shard.build_buckets();
  return ix;
}

VerifyInfo CorpusIndex::verify_file(const std::string& path) {
  HashingReader r(path);
  const Header h = read_header(r);
  for (uint32_t s = 0; s < h.shard_count; ++s) {
    (void)read_shard(r, /*keep_payload=*/false);
  }
  r.verify_checksum();
  VerifyInfo info;
  info.corpus_digest = h.corpus_digest;
  info.doc_count = h.doc_count;
  info.total_chars = h.total_chars;
  info.shard_count = h.shard_count;
  info.file_bytes = r.file_bytes();
  info.normalize_nfc = (h.flags & kFlagNfc) != 0;
  return info;
}

const digest::Sha256& CorpusIndex::corpus_digest() const {
  return impl_->header.corpus_digest;
}
uint64_t CorpusIndex::doc_count() const { return impl_->header.doc_count; }
uint64_t CorpusIndex::total_chars() const { return impl_->header.total_chars; }
uint32_t CorpusIndex::shard_count() const { return impl_->header.shard_count; }
bool CorpusIndex::normalize_nfc() const {
  return (impl_->header.flags & kFlagNfc) != 0;
}

uint64_t CorpusIndex::memory_footprint() const {
  uint64_t total = sizeof(Impl);
  for (const auto& s : impl_->shards) total += s.memory_footprint();
  return total;
}

void CorpusIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot create index file: " + path);
  write_placeholder_header(out);
  for (const auto& shard : impl_->shards) {
    write_shard_prefix(out, shard);
    write_shard_suffix(out, shard);
  }
  patch_header(out, impl_->header);
  out.close();
  if (!out) fail("write error while finalizing index file");
  append_checksum(path);
}

namespace {

// chars_upto[k] = number of complete characters in the first k bytes of the
// text whose boundaries are `offsets` (as produced by utf8::char_offsets).
std::vector<uint32_t> chars_upto_table(const std::vector<uint32_t>& offsets) {
  const std::size_t total_bytes = offsets.back();
  std::vector<uint32_t> table(total_bytes + 1);
  std::size_t c = 0;
  for (std::size_t k = 0; k <= total_bytes; ++k) {
    while (c + 1 < offsets.size() && offsets[c + 1] <= k) ++c;
    table[k] = static_cast<uint32_t>(c);
  }
  return table;
}

}  // namespace

std::size_t CorpusIndex::longest_match_len(std::string_view query) const {
  if (!utf8::is_valid(query)) {
    fail("longest_match_len: query is not valid UTF-8");
  }
  if (query.empty()) return 0;
  const auto* q = reinterpret_cast<const uint8_t*>(query.data());
  uint32_t best_bytes = 0;
  for (const auto& shard : impl_->shards) {
    best_bytes = std::max(
        best_bytes,
        shard.longest_prefix_bytes(q, static_cast<uint32_t>(query.size())));
  }
  const auto offsets = utf8::char_offsets(query);
  std::size_t c = 0;
  while (c + 1 < offsets.size() && offsets[c + 1] <= best_bytes) ++c;
  return c;
}

std::vector<uint32_t> CorpusIndex::match_lengths(std::string_view text) const {
  if (!utf8::is_valid(text)) {
    fail("match_lengths: text is not valid UTF-8");
  }
  const auto offsets = utf8::char_offsets(text);
  const std::size_t nchars = offsets.size() - 1;
  std::vector<uint32_t> ms_bytes(nchars, 0);
  const auto* q = reinterpret_cast<const uint8_t*>(text.data());
  const uint32_t total = static_cast<uint32_t>(text.size());
  for (const auto& shard : impl_->shards) {
    shard.match_stats(q, total, offsets.data(), nchars, ms_bytes.data());
  }
  const auto upto = chars_upto_table(offsets);
  std::vector<uint32_t> out(nchars);
  for (std::size_t i = 0; i < nchars; ++i) {
    out[i] = upto[offsets[i] + ms_bytes[i]] - static_cast<uint32_t>(i);
  }
  return out;
}

void IndexGroup::add(CorpusIndex index) {
  if (!members_.empty() &&
      members_.front().normalize_nfc() != index.normalize_nfc()) {
    fail("cannot mix indexes with different normalization flags in one group");
  }
  members_.push_back(std::move(index));
}

uint64_t IndexGroup::doc_count() const {
  uint64_t total = 0;
  for (const auto& m : members_) total += m.doc_count();
  return total;
}

uint64_t IndexGroup::total_chars() const {
  uint64_t total = 0;
  for (const auto& m : members_) total += m.total_chars();
  return total;
}

bool IndexGroup::normalize_nfc() const {
  return !members_.empty() && members_.front().normalize_nfc();
}

std::size_t IndexGroup::longest_match_len(std::string_view query) const {
  std::size_t best = 0;
  for (const auto& m : members_) {
    best = std::max(best, m.longest_match_len(query));
  }
  return best;
}

std::vector<uint32_t> IndexGroup::match_lengths(std::string_view text) const {
  std::vector<uint32_t> best;
  for (const auto& m : members_) {
    auto cur = m.match_lengths(text);
    if (best.empty()) {
      best = std::move(cur);
    } else {
      for (std::size_t i = 0; i < best.size(); ++i) {
        best[i] = std::max(best[i], cur[i]);
      }
    }
  }
  if (best.empty() && !text.empty()) {
    best.assign(utf8::char_count(text), 0);
  }
  return best;
}

}  // namespace repro::corpus
