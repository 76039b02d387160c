#pragma once

#include <string>
#include <string_view>

namespace csem::utf8 {

// Decodes UTF-8 into Unicode scalar values; malformed bytes become U+FFFD.
std::u32string decode(std::string_view s);

void append(std::string& out, char32_t c);
std::string encode(std::u32string_view s);

}  // namespace csem::utf8
