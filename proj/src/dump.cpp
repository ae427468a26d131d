#include "masvqa/dump.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "masvqa/error.hpp"
#include "masvqa/utf8.hpp"

namespace masvqa {

namespace {

using json = nlohmann::json;

constexpr const char* kTensorNames[] = {"cross_attn", "cross_grad", "self_attn", "self_grad"};

std::array<std::size_t, 3> expected_shape(const DumpMeta& meta, std::string_view name) {
  if (name == "cross_attn" || name == "cross_grad") {
    return {meta.heads, meta.seq_len, meta.patches};
  }
  return {meta.heads, meta.seq_len, meta.seq_len};
}

Tensor3& tensor_by_name(AttentionDump& dump, std::string_view name) {
  if (name == "cross_attn") return dump.cross_attn;
  if (name == "cross_grad") return dump.cross_grad;
  if (name == "self_attn") return dump.self_attn;
  return dump.self_grad;
}

const Tensor3& tensor_by_name(const AttentionDump& dump, std::string_view name) {
  return tensor_by_name(const_cast<AttentionDump&>(dump), name);
}

void validate_meta(const DumpMeta& meta) {
  if (meta.heads == 0 || meta.seq_len == 0 || meta.grid == 0) {
    throw Error(ErrorCode::kShapeMismatch, "dump dimensions must be positive");
  }
  if (meta.patches != meta.grid * meta.grid) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("patch count {} is not grid^2 ({}^2)", meta.patches, meta.grid));
  }
  const auto [sep0, sep1] = meta.sep_positions;
  if (!(0 < sep0 && sep0 < sep1 && sep1 < meta.seq_len)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("separator positions ({}, {}) illegal for L={}", sep0, sep1,
                            meta.seq_len));
  }
  if (meta.offset_mapping.size() != meta.seq_len) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("offset_mapping has {} entries, expected L={}",
                            meta.offset_mapping.size(), meta.seq_len));
  }
  const std::size_t text_len = utf8::length(meta.knowledge_text);
  if (meta.effective_knowledge_length > text_len) {
    throw Error(ErrorCode::kInvalidArgument, "effective knowledge length exceeds passage length");
  }
  if (!meta.truncated && meta.effective_knowledge_length != text_len) {
    throw Error(ErrorCode::kInvalidArgument,
                "effective knowledge length must equal passage length when not truncated");
  }
  std::size_t last_start = 0;
  for (std::size_t i = 0; i < meta.offset_mapping.size(); ++i) {
    const auto& off = meta.offset_mapping[i];
    if (off.start > off.end || off.end > text_len) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("token {} offsets ({}, {}) outside passage of length {}", i,
                              off.start, off.end, text_len));
    }
    const bool knowledge_token = i >= 1 && i < sep0;
    if (knowledge_token && !(off.start == 0 && off.end == 0)) {
      if (off.start < last_start) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("knowledge token {} start {} decreases", i, off.start));
      }
      last_start = off.start;
    }
  }
}

void validate_tensor(const DumpMeta& meta, const AttentionDump& dump, std::string_view name) {
  const Tensor3& t = tensor_by_name(dump, name);
  if (t.shape() != expected_shape(meta, name)) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("tensor {} shape mismatch", name));
  }
  const bool is_attention = name == "cross_attn" || name == "self_attn";
  for (float v : t.data()) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteTensor, fmt::format("tensor {} has non-finite entry", name));
    }
    if (is_attention && v < 0.0f) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("attention tensor {} has negative entry", name));
    }
  }
}

json meta_to_json(const DumpMeta& meta) {
  json offsets = json::array();
  for (const auto& off : meta.offset_mapping) offsets.push_back({off.start, off.end});
  return json{
      {"heads", meta.heads},
      {"seq_len", meta.seq_len},
      {"patches", meta.patches},
      {"grid", meta.grid},
      {"block", meta.block},
      {"sep_positions", {meta.sep_positions[0], meta.sep_positions[1]}},
      {"offset_mapping", std::move(offsets)},
      {"knowledge_text", meta.knowledge_text},
      {"question_text", meta.question_text},
      {"truncated", meta.truncated},
      {"effective_knowledge_length", meta.effective_knowledge_length},
  };
}

DumpMeta meta_from_json(const json& j) {
  DumpMeta meta;
  meta.heads = j.at("heads").get<std::size_t>();
  meta.seq_len = j.at("seq_len").get<std::size_t>();
  meta.patches = j.at("patches").get<std::size_t>();
  meta.grid = j.at("grid").get<std::size_t>();
  meta.block = j.value("block", std::size_t{7});
  const auto& sep = j.at("sep_positions");
  if (!sep.is_array() || sep.size() != 2) throw json::other_error::create(501, "sep_positions", &j);
  meta.sep_positions = {sep[0].get<std::size_t>(), sep[1].get<std::size_t>()};
  for (const auto& pair : j.at("offset_mapping")) {
    if (!pair.is_array() || pair.size() != 2) {
      throw json::other_error::create(501, "offset_mapping entry", &j);
    }
    meta.offset_mapping.push_back({pair[0].get<std::size_t>(), pair[1].get<std::size_t>()});
  }
  meta.knowledge_text = j.at("knowledge_text").get<std::string>();
  meta.question_text = j.at("question_text").get<std::string>();
  meta.truncated = j.value("truncated", false);
  meta.effective_knowledge_length =
      j.value("effective_knowledge_length", utf8::length(meta.knowledge_text));
  return meta;
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

void put_f32_le(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | p[b];
  return std::bit_cast<float>(v);
}

}  // namespace

bool AttentionDump::bit_equal(const AttentionDump& other) const {
  return meta == other.meta && cross_attn.bit_equal(other.cross_attn) &&
         cross_grad.bit_equal(other.cross_grad) && self_attn.bit_equal(other.self_attn) &&
         self_grad.bit_equal(other.self_grad);
}

void validate_dump(const AttentionDump& dump) {
  validate_meta(dump.meta);
  for (const char* name : kTensorNames) validate_tensor(dump.meta, dump, name);
}

void write_dump(const AttentionDump& dump, std::ostream& sink) {
  validate_dump(dump);

  json tensors = json::array();
  std::size_t offset = 0;
  for (const char* name : kTensorNames) {
    const Tensor3& t = tensor_by_name(dump, name);
    const std::size_t len = t.size() * sizeof(float);
    tensors.push_back({{"name", name},
                       {"shape", {t.dim(0), t.dim(1), t.dim(2)}},
                       {"dtype", "f32"},
                       {"byte_offset", offset},
                       {"byte_len", len}});
    offset += len;
  }
  const std::string header = json{{"meta", meta_to_json(dump.meta)}, {"tensors", tensors}}.dump();

  std::string out;
  out.reserve(16 + header.size() + offset);
  out.append(kDumpMagic);
  put_u64_le(out, header.size());
  out.append(header);
  for (const char* name : kTensorNames) {
    for (float v : tensor_by_name(dump, name).data()) put_f32_le(out, v);
  }
  sink.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!sink) throw Error(ErrorCode::kIo, "failed writing dump");
}

AttentionDump read_dump(std::istream& source) {
  const std::string bytes{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < kDumpMagic.size() ||
      std::string_view(bytes.data(), kDumpMagic.size()) != kDumpMagic) {
    throw Error(ErrorCode::kBadMagic, "not an attention dump (bad magic)");
  }
  if (bytes.size() < 16) throw Error(ErrorCode::kHeaderCorrupt, "missing header length");
  const std::uint64_t header_len = get_u64_le(raw + 8);
  if (header_len > bytes.size() - 16) {
    throw Error(ErrorCode::kHeaderCorrupt,
                fmt::format("header length {} exceeds file size {}", header_len, bytes.size()));
  }

  json header;
  AttentionDump dump;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    dump.meta = meta_from_json(header.at("meta"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kHeaderCorrupt, fmt::format("unreadable dump header: {}", e.what()));
  }

  const std::size_t payload_start = 16 + header_len;
  const std::size_t payload_size = bytes.size() - payload_start;
  try {
    const auto& entries = header.at("tensors");
    for (const char* name : kTensorNames) {
      const json* entry = nullptr;
      for (const auto& e : entries) {
        if (e.at("name").get<std::string>() == name) entry = &e;
      }
      if (entry == nullptr) {
        throw Error(ErrorCode::kHeaderCorrupt, fmt::format("missing tensor {}", name));
      }
      if (entry->at("dtype").get<std::string>() != "f32") {
        throw Error(ErrorCode::kHeaderCorrupt, fmt::format("tensor {} is not f32", name));
      }
      const auto shape = entry->at("shape").get<std::vector<std::size_t>>();
      const auto want = expected_shape(dump.meta, name);
      if (shape.size() != 3 || shape[0] != want[0] || shape[1] != want[1] || shape[2] != want[2]) {
        throw Error(ErrorCode::kShapeMismatch, fmt::format("tensor {} shape disagrees with meta", name));
      }
      const auto byte_offset = entry->at("byte_offset").get<std::size_t>();
      const auto byte_len = entry->at("byte_len").get<std::size_t>();
      if (byte_len != want[0] * want[1] * want[2] * sizeof(float)) {
        throw Error(ErrorCode::kShapeMismatch, fmt::format("tensor {} byte_len disagrees with shape", name));
      }
      if (byte_offset > payload_size || byte_len > payload_size - byte_offset) {
        throw Error(ErrorCode::kHeaderCorrupt, fmt::format("tensor {} payload truncated", name));
      }
      Tensor3 t(want[0], want[1], want[2]);
      const unsigned char* p = raw + payload_start + byte_offset;
      auto data = t.data();
      for (std::size_t k = 0; k < data.size(); ++k) data[k] = get_f32_le(p + 4 * k);
      tensor_by_name(dump, name) = std::move(t);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kHeaderCorrupt, fmt::format("bad tensor table: {}", e.what()));
  }

  try {
    validate_dump(dump);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) throw Error(ErrorCode::kHeaderCorrupt, e.what());
    throw;
  }
  return dump;
}

void write_dump_file(const AttentionDump& dump, const std::filesystem::path& path) {
  validate_dump(dump);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot open {} for writing", path.string()));
  write_dump(dump, out);
}

AttentionDump read_dump_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open dump {}", path.string()));
  return read_dump(in);
}

SequenceLayout layout_of(const DumpMeta& meta) {
  const auto [sep0, sep1] = meta.sep_positions;
  if (sep0 >= sep1) {
    throw Error(ErrorCode::kInvalidArgument, "separator positions out of order");
  }
  SequenceLayout layout;
  layout.knowledge = {1, sep0};
  layout.question = {sep0 + 1, sep1};
  if (layout.knowledge.empty()) throw Error(ErrorCode::kEmptyGroup, "knowledge token range is empty");
  if (layout.question.empty()) throw Error(ErrorCode::kEmptyGroup, "question token range is empty");
  layout.offset_mapping = meta.offset_mapping;
  layout.knowledge_text = meta.knowledge_text;
  layout.truncated = meta.truncated;
  layout.effective_knowledge_length = meta.effective_knowledge_length;
  return layout;
}

}  // namespace masvqa
