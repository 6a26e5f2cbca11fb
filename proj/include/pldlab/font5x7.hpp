#pragma once

namespace pldlab {

inline constexpr int kGlyphW = 5;
inline constexpr int kGlyphH = 7;

// Column bitmap for a printable ASCII character (32..126): 5 bytes, one per
// column, bit 0 = top row, 7 bits used. Throws VocabError for anything else.
const unsigned char* glyph5x7(char c);

}  // namespace pldlab
