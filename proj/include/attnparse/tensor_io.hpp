#pragma once

// Portable tensor container and corpus loading.
//
// Container layout (all integers little-endian):
//   bytes 0..7   magic "ATNPARS1"
//   bytes 8..15  u64 header length H
//   next H bytes UTF-8 JSON header:
//                {"<name>": {"dtype": "F32", "shape": [..], "offset": N}, ...,
//                 "__metadata__": {...optional free-form JSON...}}
//   remainder    raw payload; offsets are relative to its first byte
//
// Tensor names inside a corpus container:
//   s{I}/hidden/l{L}        pieces x d_model
//   s{I}/attn/l{L}/h{H}     pieces x pieces (a leading singleton dim is accepted)
//   proj/l{L}/wq, wk        d_model x d_model (concatenated heads)
// and the sidecar "<container>.json" holds [{words, pieces, alignment}, ...].

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "attnparse/matrix.hpp"

namespace attnparse {

inline constexpr char kContainerMagic[8] = {'A', 'T', 'N', 'P', 'A', 'R', 'S', '1'};
inline constexpr const char* kMetadataKey = "__metadata__";

class TensorIoError : public std::runtime_error {
public:
    enum class Kind { Io, BadMagic, MalformedHeader, Truncated, UnknownDtype, BadShape, MissingEntry, Invalid };

    TensorIoError(Kind kind, std::string entry, const std::string& what)
        : std::runtime_error(what), kind_(kind), entry_(std::move(entry)) {}

    Kind kind() const noexcept { return kind_; }
    /// Offending tensor name, or empty when the error is not entry-specific.
    const std::string& entry() const noexcept { return entry_; }

private:
    Kind kind_;
    std::string entry_;
};

enum class DType { F32 };

struct TensorEntry {
    DType dtype = DType::F32;
    std::vector<std::size_t> shape;
    std::uint64_t offset = 0;

    std::size_t element_count() const noexcept;
    std::uint64_t byte_size() const noexcept { return element_count() * 4; }
};

class TensorFile {
public:
    void add(const std::string& name, std::vector<std::size_t> shape, std::span<const float> values);
    void add(const std::string& name, const Matrix& m);

    bool contains(const std::string& name) const { return entries_.contains(name); }
    const TensorEntry& entry(const std::string& name) const;
    std::vector<std::string> names() const;
    const std::map<std::string, TensorEntry>& entries() const noexcept { return entries_; }

    std::vector<float> values(const std::string& name) const;
    /// 2-D view of a tensor; leading singleton dimensions are dropped.
    Matrix matrix(const std::string& name) const;

    const nlohmann::json& metadata() const noexcept { return metadata_; }
    void set_metadata(nlohmann::json meta);

    std::span<const std::byte> payload() const noexcept { return payload_; }

    std::vector<std::byte> serialize() const;
    static TensorFile parse(std::span<const std::byte> bytes);

private:
    std::map<std::string, TensorEntry> entries_;
    std::vector<std::byte> payload_;
    nlohmann::json metadata_ = nlohmann::json::object();
    // Header bytes exactly as read; reused on write while the file is unmodified
    // so that read-then-write reproduces foreign files byte for byte.
    std::optional<std::string> raw_header_;
};

TensorFile read_tensor_file(const std::filesystem::path& path);
void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);

/// Words, pieces and the piece-to-word alignment of one sentence. Alignment
/// value -1 marks a delimiter piece that belongs to no word.
struct SentenceMeta {
    std::vector<std::string> words;
    std::vector<std::string> pieces;
    std::vector<int> alignment;

    /// Throws TensorIoError(Invalid) when the alignment is inconsistent.
    void validate() const;
};

void to_json(nlohmann::json& j, const SentenceMeta& s);
void from_json(const nlohmann::json& j, SentenceMeta& s);

struct HeadId {
    int layer = 0;
    int head = 0;
    auto operator<=>(const HeadId&) const = default;
};

std::string hidden_name(std::size_t sentence, int layer);
std::string attention_name(std::size_t sentence, int layer, int head);
std::string projection_name(int layer, bool query);

class Corpus;

/// Lightweight view of one sentence inside a Corpus.
class SentenceRecord {
public:
    SentenceRecord(const Corpus& corpus, std::size_t index) : corpus_(&corpus), index_(index) {}

    std::size_t index() const noexcept { return index_; }
    const SentenceMeta& meta() const;
    std::size_t word_count() const { return meta().words.size(); }
    std::size_t piece_count() const { return meta().pieces.size(); }

    /// Piece-level attention; validated to be row-stochastic within 1e-4.
    Matrix attention(int layer, int head) const;
    Matrix hidden(int layer) const;
    bool has_attention(int layer, int head) const;
    bool has_hidden(int layer) const;

private:
    const Corpus* corpus_;
    std::size_t index_;
};

class Corpus {
public:
    Corpus() = default;
    Corpus(TensorFile tensors, std::vector<SentenceMeta> sentences);

    /// Reads `path` and its sidecar `path + ".json"`.
    static Corpus load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const noexcept { return sentences_.size(); }
    SentenceRecord record(std::size_t i) const;
    const SentenceMeta& sentence(std::size_t i) const { return sentences_.at(i); }
    const TensorFile& tensors() const noexcept { return tensors_; }
    TensorFile& tensors() noexcept { return tensors_; }

    /// All (layer, head) pairs that have an attention tensor for sentence 0.
    std::vector<HeadId> heads() const;

private:
    TensorFile tensors_;
    std::vector<SentenceMeta> sentences_;
};

std::filesystem::path sidecar_path(const std::filesystem::path& container);

/// Throws TensorIoError(Invalid) naming `what` unless every entry is in [0,1]
/// (within tol) and every row sums to 1 within tol.
void check_row_stochastic(const Matrix& m, double tol, const std::string& what);

}  // namespace attnparse
