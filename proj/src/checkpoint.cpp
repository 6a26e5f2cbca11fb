#include "pldlab/checkpoint.hpp"

#include <cstring>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "binio.hpp"

namespace pldlab {

using nlohmann::json;

namespace {

json encoder_to_json(const EncoderConfig& c) {
  return json{{"name", c.name},       {"blocks", c.blocks},
              {"dim", c.dim},         {"heads", c.heads},
              {"patch", c.patch},     {"image_h", c.image_h},
              {"image_w", c.image_w}, {"channels", c.channels}};
}

json decoder_to_json(const DecoderConfig& c) {
  return json{{"name", c.name},
              {"blocks", c.blocks},
              {"dim", c.dim},
              {"heads", c.heads},
              {"differential", c.differential}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  c.name = j.at("name").get<std::string>();
  c.blocks = j.at("blocks").get<int>();
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.patch = j.at("patch").get<int>();
  c.image_h = j.at("image_h").get<int>();
  c.image_w = j.at("image_w").get<int>();
  c.channels = j.at("channels").get<int>();
  return c;
}

DecoderConfig decoder_from_json(const json& j) {
  DecoderConfig c;
  c.name = j.at("name").get<std::string>();
  c.blocks = j.at("blocks").get<int>();
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.differential = j.at("differential").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model<float>& m,
                     const CheckpointMeta& meta) {
  json extra = json::object();
  if (!meta.extra.empty()) {
    extra = json::parse(meta.extra, nullptr, /*allow_exceptions=*/false);
    if (extra.is_discarded() || !extra.is_object())
      throw ConfigError("checkpoint extra must serialize a JSON object");
  }
  json header{{"version", 1},
              {"encoder", encoder_to_json(meta.encoder)},
              {"decoder", decoder_to_json(meta.decoder)},
              {"vocab", meta.vocab_chars},
              {"max_label_len", meta.max_label_len},
              {"init_seed", meta.init_seed},
              {"step", meta.step},
              {"extra", extra}};
  const std::string hs = header.dump();

  binio::Writer w(path);
  w.bytes("PLDC", 4);
  w.u32(1);  // container version
  w.u32(static_cast<std::uint32_t>(hs.size()));
  w.bytes(hs.data(), hs.size());
  const auto& items = m.params().items();
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& [name, t] : items) {
    if (name.size() > 0xFFFF) throw ConfigError("parameter name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    const auto& shape = t.shape();
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (int d : shape) w.u32(static_cast<std::uint32_t>(d));
    for (std::int64_t i = 0; i < t.size(); ++i) w.f32(t.data()[i]);
  }
  if (!w.good()) throw DataError("write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  binio::Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "PLDC", 4) != 0)
    throw FormatError("bad magic, expected PLDC", 0);
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw FormatError("unsupported checkpoint version " +
                          std::to_string(version),
                      4);
  const std::uint32_t hlen = r.u32();
  if (hlen == 0 || hlen > (1u << 20))
    throw FormatError("implausible header length " + std::to_string(hlen), 8);
  std::string hs(hlen, '\0');
  r.bytes(hs.data(), hs.size());
  json header = json::parse(hs, nullptr, /*allow_exceptions=*/false);
  if (header.is_discarded())
    throw FormatError("header is not valid JSON", 12);

  LoadedCheckpoint out;
  try {
    if (header.at("version").get<int>() != 1)
      throw FormatError("unsupported header version", 12);
    out.meta.encoder = encoder_from_json(header.at("encoder"));
    out.meta.decoder = decoder_from_json(header.at("decoder"));
    out.meta.vocab_chars = header.at("vocab").get<std::string>();
    out.meta.max_label_len = header.at("max_label_len").get<int>();
    out.meta.init_seed = header.at("init_seed").get<std::uint64_t>();
    out.meta.step = header.at("step").get<int>();
    out.meta.extra = header.at("extra").dump();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad header field: ") + e.what(), 12);
  }

  out.model = std::make_unique<Model<float>>(
      out.meta.encoder, out.meta.decoder,
      Vocab::from_chars(out.meta.vocab_chars), out.meta.init_seed);

  const std::uint32_t count = r.u32();
  auto& params = out.model->params();
  if (count != params.items().size())
    throw FormatError("tensor count " + std::to_string(count) +
                          " does not match the model (" +
                          std::to_string(params.items().size()) + ")",
                      r.offset() - 4);
  std::unordered_set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t rec_at = r.offset();
    const std::uint16_t nlen = r.u16();
    std::string name(nlen, '\0');
    r.bytes(name.data(), name.size());
    if (!params.has(name))
      throw FormatError("unknown tensor '" + name + "'", rec_at);
    if (!seen.insert(name).second)
      throw FormatError("duplicate tensor '" + name + "'", rec_at);
    Tensor<float>& t = params.get(name);
    const int rank = r.u8();
    if (rank != static_cast<int>(t.shape().size()))
      throw FormatError("tensor '" + name + "' rank mismatch", rec_at);
    for (int d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      if (static_cast<int>(dim) != t.shape()[static_cast<std::size_t>(d)])
        throw FormatError("tensor '" + name + "' shape mismatch", rec_at);
    }
    for (std::int64_t k = 0; k < t.size(); ++k) t.data()[k] = r.f32();
  }
  if (!r.at_eof())
    throw FormatError("trailing bytes after last tensor", r.offset());
  return out;
}

}  // namespace pldlab
