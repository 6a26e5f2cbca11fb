#include "pldlab/vocab.hpp"

#include <cctype>

namespace pldlab {

Vocab::Vocab(std::string charset) : charset_(std::move(charset)) {
  if (charset_.empty()) throw VocabError("empty charset");
  for (auto& v : lookup_) v = -1;
  for (std::size_t i = 0; i < charset_.size(); ++i) {
    const auto u = static_cast<unsigned char>(charset_[i]);
    if (lookup_[u] >= 0)
      throw VocabError(std::string("duplicate character '") + charset_[i] +
                       "' in charset");
    lookup_[u] = static_cast<int>(i);
  }
}

Vocab Vocab::from_chars(std::string_view chars) { return Vocab(std::string(chars)); }

Vocab Vocab::ascii94() {
  std::string s;
  for (int c = 33; c <= 126; ++c) s.push_back(static_cast<char>(c));
  return Vocab(std::move(s));
}

Vocab Vocab::toy40() {
  return Vocab("abcdefghijklmnopqrstuvwxyz0123456789-.!?");
}

char Vocab::char_at(int idx) const {
  if (idx < 0 || idx >= charset_size())
    throw VocabError("character index " + std::to_string(idx) +
                     " out of range [0, " + std::to_string(charset_size()) + ")");
  return charset_[static_cast<std::size_t>(idx)];
}

int Vocab::index_of(char c) const {
  const int i = lookup_[static_cast<unsigned char>(c)];
  if (i < 0)
    throw VocabError(std::string("character '") + c + "' (code " +
                     std::to_string(static_cast<unsigned char>(c)) +
                     ") not in charset");
  return i;
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(index_of(c));
  return out;
}

std::string Vocab::decode(const std::vector<int>& indices) const {
  std::string out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(char_at(i));
  return out;
}

std::string Vocab::fold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

}  // namespace pldlab
