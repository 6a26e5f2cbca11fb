#include "pldlab/csd.hpp"

#include <algorithm>
#include <cstring>

#include "binio.hpp"

namespace pldlab {

const TeacherArtifact* ArtifactStore::find(std::uint32_t sample_index) const {
  auto it = std::lower_bound(
      items.begin(), items.end(), sample_index,
      [](const TeacherArtifact& a, std::uint32_t v) {
        return a.sample_index < v;
      });
  if (it == items.end() || it->sample_index != sample_index) return nullptr;
  return &*it;
}

void write_artifacts(const ArtifactStore& store, const std::string& path) {
  if (store.classes <= 0)
    throw DataError("artifact store has no class count");
  if (store.items.empty())
    throw DataError("refusing to write empty artifact store");
  binio::Writer w(path);
  w.bytes("CSD1", 4);
  w.u32(1);  // version
  w.u32(static_cast<std::uint32_t>(store.items.size()));
  for (const auto& art : store.items) {
    const std::size_t L = art.pseudolabel.size();
    if (L == 0 || L > 255)
      throw DataError("artifact pseudolabel length out of range");
    if (art.cloze_logits.size() != L * static_cast<std::size_t>(store.classes))
      throw DataError("artifact logits do not match pseudolabel length");
    w.u32(art.sample_index);
    w.u8(static_cast<std::uint8_t>(L));
    for (int c : art.pseudolabel) w.u8(static_cast<std::uint8_t>(c));
    for (float v : art.cloze_logits) w.f32(v);
  }
  if (!w.good()) throw DataError("write failed for '" + path + "'");
}

ArtifactStore read_artifacts(const std::string& path, int expected_classes) {
  if (expected_classes <= 0)
    throw DataError("expected_classes must be positive");
  binio::Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "CSD1", 4) != 0)
    throw FormatError("bad magic, expected CSD1", 0);
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw FormatError("unsupported artifact version " + std::to_string(version),
                      4);
  const std::uint32_t count = r.u32();
  if (count == 0) throw FormatError("artifact store contains zero records", 8);
  ArtifactStore store;
  store.classes = expected_classes;
  store.items.reserve(count);
  std::uint32_t prev_index = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    TeacherArtifact art;
    const std::uint64_t rec_at = r.offset();
    art.sample_index = r.u32();
    if (i > 0 && art.sample_index <= prev_index)
      throw FormatError("sample indices not strictly increasing", rec_at);
    prev_index = art.sample_index;
    const int L = r.u8();
    if (L == 0)
      throw FormatError("empty pseudolabel in record " + std::to_string(i),
                        rec_at + 4);
    art.pseudolabel.resize(static_cast<std::size_t>(L));
    for (auto& c : art.pseudolabel) {
      const std::uint64_t at = r.offset();
      c = r.u8();
      // classes - 1 is EOS, which never appears inside a pseudolabel
      if (c >= expected_classes - 1)
        throw FormatError("pseudolabel class " + std::to_string(c) +
                              " out of range",
                          at);
    }
    art.cloze_logits.resize(static_cast<std::size_t>(L) * expected_classes);
    for (auto& v : art.cloze_logits) v = r.f32();
    store.items.push_back(std::move(art));
  }
  if (!r.at_eof())
    throw FormatError("trailing bytes after last record", r.offset());
  return store;
}

}  // namespace pldlab
