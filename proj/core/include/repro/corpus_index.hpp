#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repro/digest.hpp"

namespace repro::corpus {

struct Document {
  std::string doc_id;
  std::string content;  // UTF-8
};

// Streaming producer of documents. next() returns std::nullopt at end of
// stream and may throw std::runtime_error for an unreadable item; callers
// may keep iterating after such a throw (the bad item is skipped).
class DocumentSource {
 public:
  virtual ~DocumentSource() = default;
  virtual std::optional<Document> next() = 0;
};

// In-memory source, mainly for tests and programmatic use.
class VectorDocumentSource : public DocumentSource {
 public:
  explicit VectorDocumentSource(std::vector<Document> docs)
      : docs_(std::move(docs)) {}
  std::optional<Document> next() override;

 private:
  std::vector<Document> docs_;
  std::size_t pos_ = 0;
};

// Recursively reads every regular file under `root` as one document;
// doc_id is the path relative to root. Files are visited in sorted order
// so the corpus digest is stable.
class DirectoryDocumentSource : public DocumentSource {
 public:
  explicit DirectoryDocumentSource(const std::string& root);
  std::optional<Document> next() override;

 private:
  std::string root_;
  std::vector<std::string> rel_paths_;
  std::size_t pos_ = 0;
};

// Line-delimited records with fields {"doc_id": ..., "content": ...}.
// Blank lines are skipped; a malformed line raises an error naming the
// line number, after which iteration resumes on the next line.
class JsonlDocumentSource : public DocumentSource {
 public:
  explicit JsonlDocumentSource(const std::string& path);
  ~JsonlDocumentSource() override;
  std::optional<Document> next() override;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

struct IndexBuildOptions {
  bool normalize_nfc = false;  // NFC-normalize content before indexing
  bool strict = true;          // abort on a bad document instead of skipping
  uint64_t target_shard_bytes = 256ull << 20;
};

struct DocumentIssue {
  std::string doc_id;  // or "line N" when the id is unreadable
  std::string message;
};

struct BuildResult {
  digest::Sha256 corpus_digest{};
  uint64_t doc_count = 0;
  uint64_t total_chars = 0;
  uint32_t shard_count = 0;
  uint64_t index_file_bytes = 0;
  std::vector<DocumentIssue> skipped;  // populated in lenient mode
};

// Builds a persistent index at index_path. Shards are finalized and
// written one at a time, so peak memory is bounded by the shard size,
// not the corpus size.
BuildResult build_index(DocumentSource& documents, const std::string& index_path,
                        const IndexBuildOptions& options = {});

struct VerifyInfo {
  digest::Sha256 corpus_digest{};
  uint64_t doc_count = 0;
  uint64_t total_chars = 0;
  uint32_t shard_count = 0;
  uint64_t file_bytes = 0;
  bool normalize_nfc = false;
};

// Immutable, fully-resident index. Loading always checks the format
// version and the whole-file checksum. All query methods are const and
// safe for concurrent use.
class CorpusIndex {
 public:
  static CorpusIndex load(const std::string& path);

  // Integrity check without keeping the payload: magic, version, structure
  // and trailing checksum. Throws std::runtime_error on any defect.
  static VerifyInfo verify_file(const std::string& path);

  CorpusIndex(CorpusIndex&&) noexcept;
  CorpusIndex& operator=(CorpusIndex&&) noexcept;
  ~CorpusIndex();

  const digest::Sha256& corpus_digest() const;
  uint64_t doc_count() const;
  uint64_t total_chars() const;
  uint32_t shard_count() const;
  bool normalize_nfc() const;

  // Bytes held in memory by this index (text, suffix arrays, tables).
  uint64_t memory_footprint() const;

  // Re-serializes this index; the written file is loadable and carries the
  // same corpus digest and query behavior.
  void save(const std::string& path) const;

  // Largest k such that the first k characters of `query` occur
  // contiguously in some document. Counts Unicode scalar values. The query
  // must be valid UTF-8; it is matched as-is (callers normalize it when
  // the index was built with normalization).
  std::size_t longest_match_len(std::string_view query) const;

  // For each character position i of `text`, the longest prefix of the
  // suffix text[i:] found in the corpus, in characters.
  std::vector<uint32_t> match_lengths(std::string_view text) const;

 private:
  CorpusIndex();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Several independently built indexes queried as one corpus: every result
// is the element-wise maximum over the members.
class IndexGroup {
 public:
  void add(CorpusIndex index);  // throws if normalization flags disagree

  std::size_t size() const { return members_.size(); }
  uint64_t doc_count() const;
  uint64_t total_chars() const;
  bool normalize_nfc() const;
  const std::vector<CorpusIndex>& members() const { return members_; }

  std::size_t longest_match_len(std::string_view query) const;
  std::vector<uint32_t> match_lengths(std::string_view text) const;

 private:
  std::vector<CorpusIndex> members_;
};

}  // namespace repro::corpus
