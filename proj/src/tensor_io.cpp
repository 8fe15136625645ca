#include "attnparse/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace attnparse {

using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void put_u64_le(std::vector<std::byte>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64_le(const std::byte* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(std::to_integer<unsigned>(p[i])) << (8 * i);
    return v;
}

const char* dtype_name(DType) { return "F32"; }

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

}  // namespace

std::size_t TensorEntry::element_count() const noexcept {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void TensorFile::add(const std::string& name, std::vector<std::size_t> shape, std::span<const float> values) {
    if (name.empty() || name == kMetadataKey) {
        throw TensorIoError(TensorIoError::Kind::Invalid, name, "tensor name is reserved or empty");
    }
    if (shape.empty() || std::any_of(shape.begin(), shape.end(), [](std::size_t d) { return d == 0; })) {
        throw TensorIoError(TensorIoError::Kind::BadShape, name,
                            "tensor '" + name + "' has invalid shape " + shape_string(shape));
    }
    TensorEntry e;
    e.shape = std::move(shape);
    if (e.element_count() != values.size()) {
        throw TensorIoError(TensorIoError::Kind::BadShape, name,
                            "tensor '" + name + "': " + std::to_string(values.size()) +
                                " values for shape " + shape_string(e.shape));
    }
    if (entries_.contains(name)) {
        throw TensorIoError(TensorIoError::Kind::Invalid, name, "duplicate tensor '" + name + "'");
    }
    e.offset = payload_.size();
    payload_.resize(payload_.size() + values.size() * 4);
    std::byte* dst = payload_.data() + e.offset;
    for (float f : values) {
        auto bits = std::bit_cast<std::uint32_t>(f);
        if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
        std::memcpy(dst, &bits, 4);
        dst += 4;
    }
    entries_.emplace(name, std::move(e));
    raw_header_.reset();
}

void TensorFile::add(const std::string& name, const Matrix& m) {
    std::vector<float> v(m.size());
    std::transform(m.flat().begin(), m.flat().end(), v.begin(), [](double x) { return static_cast<float>(x); });
    add(name, {m.rows(), m.cols()}, v);
}

const TensorEntry& TensorFile::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw TensorIoError(TensorIoError::Kind::MissingEntry, name, "missing tensor '" + name + "'");
    }
    return it->second;
}

std::vector<std::string> TensorFile::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

std::vector<float> TensorFile::values(const std::string& name) const {
    const TensorEntry& e = entry(name);
    std::vector<float> out(e.element_count());
    const std::byte* src = payload_.data() + e.offset;
    for (float& f : out) {
        std::uint32_t bits;
        std::memcpy(&bits, src, 4);
        if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
        f = std::bit_cast<float>(bits);
        src += 4;
    }
    return out;
}

Matrix TensorFile::matrix(const std::string& name) const {
    const TensorEntry& e = entry(name);
    std::size_t leading = 0;
    while (e.shape.size() - leading > 2 && e.shape[leading] == 1) ++leading;
    const std::size_t rank = e.shape.size() - leading;
    if (rank > 2) {
        throw TensorIoError(TensorIoError::Kind::BadShape, name,
                            "tensor '" + name + "' with shape " + shape_string(e.shape) + " is not a matrix");
    }
    const std::size_t rows = rank == 2 ? e.shape[leading] : 1;
    const std::size_t cols = e.shape.back();
    auto v = values(name);
    return Matrix(rows, cols, std::vector<double>(v.begin(), v.end()));
}

void TensorFile::set_metadata(json meta) {
    metadata_ = std::move(meta);
    raw_header_.reset();
}

std::vector<std::byte> TensorFile::serialize() const {
    std::string header;
    if (raw_header_) {
        header = *raw_header_;
    } else {
        json h = json::object();
        for (const auto& [name, e] : entries_) {
            h[name] = {{"dtype", dtype_name(e.dtype)}, {"shape", e.shape}, {"offset", e.offset}};
        }
        if (!metadata_.empty()) h[kMetadataKey] = metadata_;
        header = h.dump();
    }
    std::vector<std::byte> out;
    out.reserve(16 + header.size() + payload_.size());
    for (char c : kContainerMagic) out.push_back(static_cast<std::byte>(c));
    put_u64_le(out, header.size());
    for (char c : header) out.push_back(static_cast<std::byte>(c));
    out.insert(out.end(), payload_.begin(), payload_.end());
    return out;
}

TensorFile TensorFile::parse(std::span<const std::byte> bytes) {
    using K = TensorIoError::Kind;
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kContainerMagic, 8) != 0) {
        throw TensorIoError(K::BadMagic, "", "not a tensor container (bad magic)");
    }
    const std::uint64_t header_len = get_u64_le(bytes.data() + 8);
    if (header_len > bytes.size() - 16) {
        throw TensorIoError(K::MalformedHeader, "", "header length " + std::to_string(header_len) +
                                                        " exceeds file size");
    }
    std::string header(reinterpret_cast<const char*>(bytes.data() + 16), header_len);
    json h;
    try {
        h = json::parse(header);
    } catch (const json::parse_error& e) {
        throw TensorIoError(K::MalformedHeader, "", std::string("header is not valid JSON: ") + e.what());
    }
    if (!h.is_object()) throw TensorIoError(K::MalformedHeader, "", "header is not a JSON object");

    TensorFile file;
    file.payload_.assign(bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len), bytes.end());
    for (auto it = h.begin(); it != h.end(); ++it) {
        const std::string& name = it.key();
        if (name == kMetadataKey) {
            file.metadata_ = it.value();
            continue;
        }
        const json& spec = it.value();
        if (!spec.is_object() || !spec.contains("dtype") || !spec.contains("shape") || !spec.contains("offset") ||
            !spec["dtype"].is_string() || !spec["shape"].is_array() || !spec["offset"].is_number_unsigned()) {
            throw TensorIoError(K::MalformedHeader, name, "malformed header entry for '" + name + "'");
        }
        if (spec["dtype"].get<std::string>() != "F32") {
            throw TensorIoError(K::UnknownDtype, name,
                                "tensor '" + name + "' has unsupported dtype '" + spec["dtype"].get<std::string>() + "'");
        }
        TensorEntry e;
        for (const json& d : spec["shape"]) {
            if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
                throw TensorIoError(K::BadShape, name, "tensor '" + name + "' has a non-positive dimension");
            }
            e.shape.push_back(d.get<std::size_t>());
        }
        if (e.shape.empty()) throw TensorIoError(K::BadShape, name, "tensor '" + name + "' has an empty shape");
        e.offset = spec["offset"].get<std::uint64_t>();
        if (e.offset > file.payload_.size() || e.byte_size() > file.payload_.size() - e.offset) {
            throw TensorIoError(K::Truncated, name,
                                "payload truncated: tensor '" + name + "' needs bytes [" + std::to_string(e.offset) +
                                    ", " + std::to_string(e.offset + e.byte_size()) + ") of " +
                                    std::to_string(file.payload_.size()));
        }
        file.entries_.emplace(name, std::move(e));
    }
    file.raw_header_ = std::move(header);
    return file;
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TensorIoError(TensorIoError::Kind::Io, "", "cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return TensorFile::parse(std::as_bytes(std::span<const char>(raw)));
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
    const auto bytes = file.serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TensorIoError(TensorIoError::Kind::Io, "", "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw TensorIoError(TensorIoError::Kind::Io, "", "write failed for " + path.string());
}

void SentenceMeta::validate() const {
    using K = TensorIoError::Kind;
    if (alignment.size() != pieces.size()) {
        throw TensorIoError(K::Invalid, "", "alignment length " + std::to_string(alignment.size()) +
                                                " != piece count " + std::to_string(pieces.size()));
    }
    int prev = -1;
    std::vector<bool> owned(words.size(), false);
    for (std::size_t p = 0; p < alignment.size(); ++p) {
        const int w = alignment[p];
        if (w == -1) continue;
        if (w < 0 || static_cast<std::size_t>(w) >= words.size()) {
            throw TensorIoError(K::Invalid, "", "alignment of piece " + std::to_string(p) + " out of range");
        }
        if (w < prev) throw TensorIoError(K::Invalid, "", "alignment is not monotone at piece " + std::to_string(p));
        prev = w;
        owned[static_cast<std::size_t>(w)] = true;
    }
    for (std::size_t w = 0; w < owned.size(); ++w) {
        if (!owned[w]) throw TensorIoError(K::Invalid, "", "word " + std::to_string(w) + " owns no piece");
    }
}

void to_json(json& j, const SentenceMeta& s) {
    j = json{{"words", s.words}, {"pieces", s.pieces}, {"alignment", s.alignment}};
}

void from_json(const json& j, SentenceMeta& s) {
    j.at("words").get_to(s.words);
    j.at("pieces").get_to(s.pieces);
    j.at("alignment").get_to(s.alignment);
}

std::string hidden_name(std::size_t sentence, int layer) {
    return "s" + std::to_string(sentence) + "/hidden/l" + std::to_string(layer);
}

std::string attention_name(std::size_t sentence, int layer, int head) {
    return "s" + std::to_string(sentence) + "/attn/l" + std::to_string(layer) + "/h" + std::to_string(head);
}

std::string projection_name(int layer, bool query) {
    return "proj/l" + std::to_string(layer) + (query ? "/wq" : "/wk");
}

void check_row_stochastic(const Matrix& m, double tol, const std::string& what) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (double v : m.row(i)) {
            if (!(v >= -tol && v <= 1.0 + tol)) {
                throw TensorIoError(TensorIoError::Kind::Invalid, what,
                                    what + ": entry outside [0,1] in row " + std::to_string(i));
            }
            s += v;
        }
        if (std::abs(s - 1.0) > tol) {
            throw TensorIoError(TensorIoError::Kind::Invalid, what,
                                what + ": row " + std::to_string(i) + " sums to " + std::to_string(s));
        }
    }
}

const SentenceMeta& SentenceRecord::meta() const { return corpus_->sentence(index_); }

Matrix SentenceRecord::attention(int layer, int head) const {
    const std::string name = attention_name(index_, layer, head);
    Matrix m = corpus_->tensors().matrix(name);
    if (m.rows() != piece_count() || m.cols() != piece_count()) {
        throw TensorIoError(TensorIoError::Kind::BadShape, name,
                            name + ": expected " + std::to_string(piece_count()) + "x" +
                                std::to_string(piece_count()));
    }
    check_row_stochastic(m, 1e-4, name);
    return m;
}

Matrix SentenceRecord::hidden(int layer) const {
    const std::string name = hidden_name(index_, layer);
    Matrix m = corpus_->tensors().matrix(name);
    if (m.rows() != piece_count()) {
        throw TensorIoError(TensorIoError::Kind::BadShape, name,
                            name + ": expected " + std::to_string(piece_count()) + " rows");
    }
    return m;
}

bool SentenceRecord::has_attention(int layer, int head) const {
    return corpus_->tensors().contains(attention_name(index_, layer, head));
}

bool SentenceRecord::has_hidden(int layer) const { return corpus_->tensors().contains(hidden_name(index_, layer)); }

Corpus::Corpus(TensorFile tensors, std::vector<SentenceMeta> sentences)
    : tensors_(std::move(tensors)), sentences_(std::move(sentences)) {
    for (std::size_t i = 0; i < sentences_.size(); ++i) {
        try {
            sentences_[i].validate();
        } catch (const TensorIoError& e) {
            throw TensorIoError(e.kind(), e.entry(), "sentence " + std::to_string(i) + ": " + e.what());
        }
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path& container) {
    return std::filesystem::path(container.string() + ".json");
}

Corpus Corpus::load(const std::filesystem::path& path) {
    TensorFile tensors = read_tensor_file(path);
    const auto side = sidecar_path(path);
    std::ifstream in(side);
    if (!in) throw TensorIoError(TensorIoError::Kind::Io, "", "cannot open sidecar " + side.string());
    std::vector<SentenceMeta> sentences;
    try {
        sentences = json::parse(in).get<std::vector<SentenceMeta>>();
    } catch (const json::exception& e) {
        throw TensorIoError(TensorIoError::Kind::MalformedHeader, "",
                            "malformed sidecar " + side.string() + ": " + e.what());
    }
    Corpus c(std::move(tensors), std::move(sentences));
    // Eager validation of every attention tensor keeps later failures impossible.
    for (std::size_t i = 0; i < c.size(); ++i) {
        const std::string prefix = "s" + std::to_string(i) + "/attn/";
        for (auto it = c.tensors_.entries().lower_bound(prefix);
             it != c.tensors_.entries().end() && it->first.starts_with(prefix); ++it) {
            Matrix m = c.tensors_.matrix(it->first);
            if (m.rows() != m.cols() || m.rows() != c.sentences_[i].pieces.size()) {
                throw TensorIoError(TensorIoError::Kind::BadShape, it->first, it->first + ": not pieces x pieces");
            }
            check_row_stochastic(m, 1e-4, it->first);
        }
    }
    return c;
}

void Corpus::save(const std::filesystem::path& path) const {
    write_tensor_file(path, tensors_);
    std::ofstream out(sidecar_path(path), std::ios::trunc);
    if (!out) throw TensorIoError(TensorIoError::Kind::Io, "", "cannot write sidecar for " + path.string());
    out << json(sentences_).dump() << '\n';
}

SentenceRecord Corpus::record(std::size_t i) const {
    if (i >= sentences_.size()) throw std::out_of_range("sentence index " + std::to_string(i) + " out of range");
    return SentenceRecord(*this, i);
}

std::vector<HeadId> Corpus::heads() const {
    std::set<HeadId> found;
    const std::string prefix = "s0/attn/l";
    for (auto it = tensors_.entries().lower_bound(prefix);
         it != tensors_.entries().end() && it->first.starts_with(prefix); ++it) {
        HeadId id;
        if (std::sscanf(it->first.c_str(), "s0/attn/l%d/h%d", &id.layer, &id.head) == 2) found.insert(id);
    }
    return {found.begin(), found.end()};
}

}  // namespace attnparse
