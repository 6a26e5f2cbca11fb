#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pldlab/errors.hpp"

namespace pldlab {

// Longest label any model instance will see (images can carry fewer).
inline constexpr int kMaxLabelLen = 25;

// Character inventory. Labels are stored as indices into `charset`; the
// model's output head has num_classes() = |charset| + 1 logits, the last one
// being EOS. BOS and PAD never appear in labels or logits: BOS only exists
// as a context embedding, PAD only as a batch-packing sentinel.
class Vocab {
 public:
  static Vocab from_chars(std::string_view chars);
  // the 94 printable ASCII characters 33..126
  static Vocab ascii94();
  // 40-character toy set: a-z 0-9 - . ! ?
  static Vocab toy40();

  int charset_size() const { return static_cast<int>(charset_.size()); }
  int num_classes() const { return charset_size() + 1; }  // chars + EOS
  int eos_class() const { return charset_size(); }        // index in logits

  // context-embedding row indices (table has charset + BOS + EOS rows)
  int bos_embedding() const { return charset_size(); }
  int eos_embedding() const { return charset_size() + 1; }
  int embedding_rows() const { return charset_size() + 2; }

  char char_at(int idx) const;
  // throws VocabError on characters outside the charset
  int index_of(char c) const;
  std::vector<int> encode(std::string_view text) const;
  std::string decode(const std::vector<int>& indices) const;
  bool contains(char c) const { return lookup_[static_cast<unsigned char>(c)] >= 0; }

  const std::string& chars() const { return charset_; }
  bool operator==(const Vocab& o) const { return charset_ == o.charset_; }

  // Case/punctuation-insensitive comparison key: lowercase, keep only
  // [a-z0-9]. "EAT-OUT!" and "eatout" fold to the same string.
  static std::string fold(std::string_view s);

 private:
  explicit Vocab(std::string charset);
  std::string charset_;
  int lookup_[256];
};

}  // namespace pldlab
