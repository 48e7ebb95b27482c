#include "lineage/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "lineage/error.hpp"

namespace lineage {
namespace {

using nlohmann::json;

constexpr std::string_view kMetadataKey = "__metadata__";

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorKind::kMalformedFile, what);
}

std::string_view dtype_name(StoredDtype d) { return d == StoredDtype::kF32 ? "f32" : "f64"; }
std::size_t dtype_width(StoredDtype d) { return d == StoredDtype::kF32 ? 4 : 8; }

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

void encode_values(std::string& out, const Tensor& t) {
  for (double x : t.values) {
    if (t.dtype == StoredDtype::kF64) {
      put_u64(out, std::bit_cast<std::uint64_t>(x));
    } else {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
}

std::vector<double> decode_values(const unsigned char* p, std::size_t count, StoredDtype d) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (d == StoredDtype::kF64) {
      out[i] = std::bit_cast<double>(get_u64(p + 8 * i));
    } else {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | p[4 * i + b];
      out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double_field(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) malformed("metadata missing \"" + key + "\"");
  double v = 0.0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    malformed("metadata \"" + key + "\" is not a number: " + s);
  }
  return v;
}

std::size_t parse_count_field(const std::map<std::string, std::string>& meta,
                              const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) malformed("metadata missing \"" + key + "\"");
  std::size_t v = 0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    malformed("metadata \"" + key + "\" is not an integer: " + s);
  }
  return v;
}

Tensor matrix_tensor(const Matrix& m, StoredDtype d) {
  return Tensor{d, {m.rows(), m.cols()}, {m.data().begin(), m.data().end()}};
}

Tensor vector_tensor(const std::vector<double>& v, StoredDtype d) {
  return Tensor{d, {v.size()}, v};
}

Matrix tensor_matrix(const std::string& name, const Tensor& t) {
  if (t.shape.size() != 2) {
    throw Error(ErrorKind::kShapeMismatch, name + " must be 2-D");
  }
  return Matrix(t.shape[0], t.shape[1], t.values);
}

std::vector<double> tensor_vector(const std::string& name, const Tensor& t) {
  if (t.shape.size() != 1) {
    throw Error(ErrorKind::kShapeMismatch, name + " must be 1-D");
  }
  return t.values;
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_finite(const Matrix& m, const std::string& name) {
  if (!m.all_finite()) {
    throw Error(ErrorKind::kInvariantViolation, name + " contains non-finite values");
  }
}

void check_finite(const std::vector<double>& v, const std::string& name) {
  if (!std::ranges::all_of(v, [](double x) { return std::isfinite(x); })) {
    throw Error(ErrorKind::kInvariantViolation, name + " contains non-finite values");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace

Vocab::Vocab(std::map<std::string, std::size_t> entries) : entries_(std::move(entries)) {
  std::vector<char> seen(entries_.size(), 0);
  for (const auto& [token, index] : entries_) {
    if (index >= entries_.size()) {
      throw Error(ErrorKind::kInvariantViolation,
                  "vocab has a gap: index " + std::to_string(index) + " for token \"" + token +
                      "\" exceeds size " + std::to_string(entries_.size()));
    }
    if (seen[index]) {
      throw Error(ErrorKind::kInvariantViolation,
                  "vocab has duplicate index " + std::to_string(index));
    }
    seen[index] = 1;
  }
}

Vocab Vocab::sequential(std::size_t n) {
  std::map<std::string, std::size_t> entries;
  for (std::size_t i = 0; i < n; ++i) entries.emplace("t" + std::to_string(i), i);
  return Vocab(std::move(entries));
}

std::optional<std::size_t> Vocab::find(const std::string& token) const {
  const auto it = entries_.find(token);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool WeightBundle::has_forward_weights() const noexcept {
  return lm_head.has_value() &&
         std::ranges::all_of(layers, [](const LayerWeights& l) { return l.has_forward_weights(); });
}

void validate(const WeightBundle& b) {
  const std::size_t n = b.hidden_dim();
  if (b.embedding.rows() == 0 || n == 0) {
    throw Error(ErrorKind::kShapeMismatch, "embedding is empty");
  }
  if (b.vocab.size() != b.embedding.rows()) {
    throw Error(ErrorKind::kShapeMismatch,
                "vocab size " + std::to_string(b.vocab.size()) + " differs from embedding rows " +
                    std::to_string(b.embedding.rows()));
  }
  if (!(b.rope_base > 0.0) || !std::isfinite(b.rope_base)) {
    throw Error(ErrorKind::kInvariantViolation, "rope_base must be positive");
  }
  if (!(b.norm_epsilon > 0.0) || !std::isfinite(b.norm_epsilon)) {
    throw Error(ErrorKind::kInvariantViolation, "norm_epsilon must be positive");
  }
  check_finite(b.embedding, "embedding");
  if (b.lm_head) {
    if (b.lm_head->rows() != b.embedding.rows() || b.lm_head->cols() != n) {
      throw Error(ErrorKind::kShapeMismatch, "lm_head shape " + shape_str(*b.lm_head) +
                                                 " differs from embedding " +
                                                 shape_str(b.embedding));
    }
    check_finite(*b.lm_head, "lm_head");
  }

  for (std::size_t i = 0; i < b.layers.size(); ++i) {
    const auto& l = b.layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    for (const auto& [name, m] : {std::pair<const char*, const Matrix*>{"q", &l.q}, {"k", &l.k}}) {
      if (m->cols() != n) {
        throw Error(ErrorKind::kShapeMismatch, p + name + " has " + std::to_string(m->cols()) +
                                                   " columns, hidden size is " +
                                                   std::to_string(n));
      }
      if (m->rows() == 0 || m->rows() % 2 != 0) {
        throw Error(ErrorKind::kShapeMismatch,
                    p + name + " needs an even, nonzero row count for RoPE");
      }
      check_finite(*m, p + name);
    }
    if (l.attn_norm.size() != n || l.ffn_norm.size() != n) {
      throw Error(ErrorKind::kShapeMismatch, p + "norm vectors must have length " +
                                                 std::to_string(n));
    }
    check_finite(l.attn_norm, p + "attn_norm");
    check_finite(l.ffn_norm, p + "ffn_norm");

    const bool any = l.v || l.o || l.ffn_up || l.ffn_gate || l.ffn_down;
    if (any && !l.has_forward_weights()) {
      throw Error(ErrorKind::kInvariantViolation,
                  p + "v/o/ffn tensors must be present together or not at all");
    }
    if (!any) continue;
    const std::size_t dv = l.v->rows();
    const std::size_t dff = l.ffn_up->rows();
    if (l.v->cols() != n || l.o->rows() != n || l.o->cols() != dv) {
      throw Error(ErrorKind::kShapeMismatch, p + "v/o shapes " + shape_str(*l.v) + ", " +
                                                 shape_str(*l.o) + " are inconsistent");
    }
    if (l.ffn_up->cols() != n || l.ffn_gate->rows() != dff || l.ffn_gate->cols() != n ||
        l.ffn_down->rows() != n || l.ffn_down->cols() != dff) {
      throw Error(ErrorKind::kShapeMismatch, p + "ffn shapes are inconsistent");
    }
    check_finite(*l.v, p + "v");
    check_finite(*l.o, p + "o");
    check_finite(*l.ffn_up, p + "ffn_up");
    check_finite(*l.ffn_gate, p + "ffn_gate");
    check_finite(*l.ffn_down, p + "ffn_down");
  }
}

Container read_container(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 8) malformed("file shorter than the 8-byte header length");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t header_len = get_u64(raw);
  if (header_len == 0) malformed("header length is 0");
  if (header_len > bytes.size() - 8) malformed("header length exceeds file size");

  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    malformed(std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object()) malformed("header is not a JSON object");

  const std::size_t data_begin = 8 + header_len;
  const std::size_t data_size = bytes.size() - data_begin;

  Container c;
  struct Range {
    std::size_t begin, end;
    std::string name;
  };
  std::vector<Range> ranges;

  for (const auto& [name, entry] : header.items()) {
    if (name == kMetadataKey) {
      if (!entry.is_object()) malformed("__metadata__ is not an object");
      for (const auto& [k, v] : entry.items()) {
        if (!v.is_string()) malformed("metadata value for \"" + k + "\" is not a string");
        c.metadata.emplace(k, v.get<std::string>());
      }
      continue;
    }
    if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") ||
        !entry.contains("data_offsets")) {
      malformed("tensor \"" + name + "\" lacks dtype/shape/data_offsets");
    }
    const auto& dtype = entry["dtype"];
    if (!dtype.is_string()) malformed("tensor \"" + name + "\" dtype is not a string");
    Tensor t;
    if (dtype == "f64") {
      t.dtype = StoredDtype::kF64;
    } else if (dtype == "f32") {
      t.dtype = StoredDtype::kF32;
    } else {
      throw Error(ErrorKind::kUnsupportedDtype,
                  "tensor \"" + name + "\" has unsupported dtype " + dtype.dump());
    }
    const auto& shape = entry["shape"];
    const auto& offsets = entry["data_offsets"];
    if (!shape.is_array()) malformed("tensor \"" + name + "\" shape is not an array");
    for (const auto& d : shape) {
      if (!d.is_number_unsigned()) malformed("tensor \"" + name + "\" has a bad dimension");
      t.shape.push_back(d.get<std::size_t>());
    }
    if (!offsets.is_array() || offsets.size() != 2 || !offsets[0].is_number_unsigned() ||
        !offsets[1].is_number_unsigned()) {
      malformed("tensor \"" + name + "\" data_offsets must be [begin, end]");
    }
    const auto begin = offsets[0].get<std::size_t>();
    const auto end = offsets[1].get<std::size_t>();
    if (begin > end || end > data_size) {
      malformed("tensor \"" + name + "\" offsets [" + std::to_string(begin) + ", " +
                std::to_string(end) + ") are out of range");
    }
    const std::size_t count = element_count(t.shape);
    if (end - begin != count * dtype_width(t.dtype)) {
      malformed("tensor \"" + name + "\" byte length does not match its shape");
    }
    t.values = decode_values(raw + data_begin + begin, count, t.dtype);
    ranges.push_back({begin, end, name});
    c.tensors.emplace(name, std::move(t));
  }

  std::ranges::sort(ranges, {}, &Range::begin);
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].begin < ranges[i - 1].end) {
      malformed("tensors \"" + ranges[i - 1].name + "\" and \"" + ranges[i].name +
                "\" overlap");
    }
  }
  return c;
}

void write_container(const Container& c, const std::filesystem::path& path) {
  json header = json::object();
  std::string data;
  for (const auto& [name, t] : c.tensors) {
    if (name == kMetadataKey) malformed("tensor name collides with __metadata__");
    if (t.values.size() != element_count(t.shape)) {
      throw Error(ErrorKind::kShapeMismatch, "tensor \"" + name + "\" value count mismatch");
    }
    const std::size_t begin = data.size();
    encode_values(data, t);
    header[name] = {{"dtype", dtype_name(t.dtype)},
                    {"shape", t.shape},
                    {"data_offsets", {begin, data.size()}}};
  }
  header[std::string(kMetadataKey)] = c.metadata;
  const std::string header_text = header.dump();

  std::string bytes;
  bytes.reserve(8 + header_text.size() + data.size());
  put_u64(bytes, header_text.size());
  bytes += header_text;
  bytes += data;
  write_file(path, bytes);
}

Container to_container(const WeightBundle& b, StoredDtype d) {
  Container c;
  c.metadata["rope_base"] = format_double(b.rope_base);
  c.metadata["norm_epsilon"] = format_double(b.norm_epsilon);
  c.metadata["num_layers"] = std::to_string(b.layers.size());
  c.tensors["embedding"] = matrix_tensor(b.embedding, d);
  if (b.lm_head) c.tensors["lm_head"] = matrix_tensor(*b.lm_head, d);
  for (std::size_t i = 0; i < b.layers.size(); ++i) {
    const auto& l = b.layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    c.tensors[p + "q"] = matrix_tensor(l.q, d);
    c.tensors[p + "k"] = matrix_tensor(l.k, d);
    c.tensors[p + "attn_norm"] = vector_tensor(l.attn_norm, d);
    c.tensors[p + "ffn_norm"] = vector_tensor(l.ffn_norm, d);
    if (l.v) c.tensors[p + "v"] = matrix_tensor(*l.v, d);
    if (l.o) c.tensors[p + "o"] = matrix_tensor(*l.o, d);
    if (l.ffn_up) c.tensors[p + "ffn_up"] = matrix_tensor(*l.ffn_up, d);
    if (l.ffn_gate) c.tensors[p + "ffn_gate"] = matrix_tensor(*l.ffn_gate, d);
    if (l.ffn_down) c.tensors[p + "ffn_down"] = matrix_tensor(*l.ffn_down, d);
  }
  return c;
}

WeightBundle from_container(const Container& c, Vocab vocab) {
  WeightBundle b;
  b.vocab = std::move(vocab);
  b.rope_base = parse_double_field(c.metadata, "rope_base");
  b.norm_epsilon = parse_double_field(c.metadata, "norm_epsilon");
  const std::size_t num_layers = parse_count_field(c.metadata, "num_layers");
  b.layers.resize(num_layers);

  std::vector<std::map<std::string, const Tensor*>> per_layer(num_layers);
  for (const auto& [name, t] : c.tensors) {
    if (name == "embedding") {
      b.embedding = tensor_matrix(name, t);
    } else if (name == "lm_head") {
      b.lm_head = tensor_matrix(name, t);
    } else if (name.starts_with("layers.")) {
      const auto dot = name.find('.', 7);
      if (dot == std::string::npos) malformed("bad tensor name \"" + name + "\"");
      std::size_t index = 0;
      const auto res = std::from_chars(name.data() + 7, name.data() + dot, index);
      if (res.ec != std::errc() || res.ptr != name.data() + dot) {
        malformed("bad layer index in \"" + name + "\"");
      }
      if (index >= num_layers) {
        malformed("tensor \"" + name + "\" refers to a layer beyond num_layers");
      }
      per_layer[index][name.substr(dot + 1)] = &t;
    } else {
      malformed("unknown tensor \"" + name + "\"");
    }
  }
  if (b.embedding.empty()) throw Error(ErrorKind::kMissingTensor, "missing tensor \"embedding\"");

  static const std::vector<std::string> kKnown = {"q",        "k",      "v",       "o",
                                                  "attn_norm", "ffn_norm", "ffn_up", "ffn_gate",
                                                  "ffn_down"};
  for (std::size_t i = 0; i < num_layers; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    auto& l = b.layers[i];
    const auto& parts = per_layer[i];
    for (const auto& [part, _] : parts) {
      if (std::ranges::find(kKnown, part) == kKnown.end()) {
        malformed("unknown tensor \"" + p + part + "\"");
      }
    }
    auto require = [&](const std::string& part) -> const Tensor& {
      const auto it = parts.find(part);
      if (it == parts.end()) {
        throw Error(ErrorKind::kMissingTensor, "missing tensor \"" + p + part + "\"");
      }
      return *it->second;
    };
    auto optional_matrix = [&](const std::string& part) -> std::optional<Matrix> {
      const auto it = parts.find(part);
      if (it == parts.end()) return std::nullopt;
      return tensor_matrix(p + part, *it->second);
    };
    l.q = tensor_matrix(p + "q", require("q"));
    l.k = tensor_matrix(p + "k", require("k"));
    l.attn_norm = tensor_vector(p + "attn_norm", require("attn_norm"));
    l.ffn_norm = tensor_vector(p + "ffn_norm", require("ffn_norm"));
    l.v = optional_matrix("v");
    l.o = optional_matrix("o");
    l.ffn_up = optional_matrix("ffn_up");
    l.ffn_gate = optional_matrix("ffn_gate");
    l.ffn_down = optional_matrix("ffn_down");
  }
  validate(b);
  return b;
}

std::filesystem::path vocab_path_for(const std::filesystem::path& bundle_path) {
  auto p = bundle_path;
  p.replace_filename(bundle_path.stem().string() + ".vocab.json");
  return p;
}

Vocab parse_vocab_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    malformed(std::string("vocab is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) malformed("vocab must be a JSON object of token -> index");
  std::map<std::string, std::size_t> entries;
  std::vector<std::size_t> indices;
  for (const auto& [token, value] : doc.items()) {
    if (!value.is_number_unsigned()) {
      malformed("vocab index for token \"" + token + "\" is not a non-negative integer");
    }
    const auto index = value.get<std::size_t>();
    entries.emplace(token, index);
    indices.push_back(index);
  }
  std::ranges::sort(indices);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0 && indices[i] == indices[i - 1]) {
      malformed("vocab has duplicate index " + std::to_string(indices[i]));
    }
    if (indices[i] != i) {
      malformed("vocab has a gap: index " + std::to_string(i) + " is missing");
    }
  }
  return Vocab(std::move(entries));
}

std::string vocab_to_json(const Vocab& vocab) {
  json doc = json::object();
  for (const auto& [token, index] : vocab.entries()) doc[token] = index;
  return doc.dump();
}

Vocab load_vocab(const std::filesystem::path& path) { return parse_vocab_json(read_file(path)); }

void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  write_file(path, vocab_to_json(vocab));
}

WeightBundle load_bundle(const std::filesystem::path& path) {
  const Container c = read_container(path);
  Vocab vocab = load_vocab(vocab_path_for(path));
  return from_container(c, std::move(vocab));
}

void save_bundle(const WeightBundle& bundle, const std::filesystem::path& path,
                 StoredDtype dtype) {
  validate(bundle);
  write_container(to_container(bundle, dtype), path);
  save_vocab(bundle.vocab, vocab_path_for(path));
}

}  // namespace lineage
