#include "pldlab/config.hpp"

namespace pldlab {

void EncoderConfig::validate() const {
  if (blocks < 1 || dim < 1 || heads < 1 || patch < 1 || image_h < 1 ||
      image_w < 1 || channels < 1)
    throw ConfigError("encoder config '" + name + "' has non-positive fields");
  if (dim % heads != 0)
    throw ConfigError("encoder dim " + std::to_string(dim) +
                      " not divisible by heads " + std::to_string(heads));
  if (image_h % patch != 0 || image_w % patch != 0)
    throw ConfigError("image " + std::to_string(image_w) + "x" +
                      std::to_string(image_h) + " not divisible by patch " +
                      std::to_string(patch));
}

void DecoderConfig::validate() const {
  if (blocks < 1 || dim < 1 || heads < 1)
    throw ConfigError("decoder config '" + name + "' has non-positive fields");
  if (dim % heads != 0)
    throw ConfigError("decoder dim " + std::to_string(dim) +
                      " not divisible by heads " + std::to_string(heads));
  if (differential && head_dim() % 2 != 0)
    throw ConfigError("differential attention needs an even head dim, got " +
                      std::to_string(head_dim()));
}

EncoderConfig encoder_preset(const std::string& name) {
  EncoderConfig c;
  c.name = name;
  if (name == "vit-t") {
    c.blocks = 12; c.dim = 192; c.heads = 3;
  } else if (name == "vit-s") {
    c.blocks = 12; c.dim = 384; c.heads = 6;
  } else if (name == "vit-b") {
    c.blocks = 12; c.dim = 768; c.heads = 12;
  } else if (name == "uvit-t" || name == "uvit-s" || name == "uvit-b") {
    c.patch = 8; c.image_h = 32; c.image_w = 64; c.channels = 1; c.blocks = 4;
    if (name == "uvit-t") { c.dim = 64;  c.heads = 2; }
    if (name == "uvit-s") { c.dim = 128; c.heads = 4; }
    if (name == "uvit-b") { c.dim = 256; c.heads = 8; }
  } else {
    throw ConfigError("unknown encoder preset '" + name + "'");
  }
  c.validate();
  return c;
}

DecoderConfig decoder_preset(const std::string& name) {
  DecoderConfig c;
  c.name = name;
  if (name == "pld-t") {
    c.blocks = 1; c.dim = 384; c.heads = 6;
  } else if (name == "pld-s") {
    c.blocks = 1; c.dim = 768; c.heads = 12;
  } else if (name == "pld-b") {
    c.blocks = 2; c.dim = 768; c.heads = 12;
  } else if (name == "pld-l") {
    c.blocks = 3; c.dim = 768; c.heads = 12;
  } else if (name == "pld-diff") {
    c.blocks = 2; c.dim = 768; c.heads = 12; c.differential = true;
  } else if (name == "upld-t") {
    c.blocks = 1; c.dim = 64; c.heads = 2;
  } else if (name == "upld-s") {
    c.blocks = 1; c.dim = 128; c.heads = 4;
  } else if (name == "upld-b") {
    c.blocks = 2; c.dim = 128; c.heads = 4;
  } else if (name == "upld-l") {
    c.blocks = 3; c.dim = 128; c.heads = 4;
  } else if (name == "upld-diff") {
    c.blocks = 2; c.dim = 128; c.heads = 4; c.differential = true;
  } else {
    throw ConfigError("unknown decoder preset '" + name + "'");
  }
  c.validate();
  return c;
}

std::vector<std::string> encoder_preset_names() {
  return {"vit-t", "vit-s", "vit-b", "uvit-t", "uvit-s", "uvit-b"};
}

std::vector<std::string> decoder_preset_names() {
  return {"pld-t",  "pld-s",  "pld-b",  "pld-l",  "pld-diff",
          "upld-t", "upld-s", "upld-b", "upld-l", "upld-diff"};
}

}  // namespace pldlab
