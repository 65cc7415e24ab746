#pragma once

#include <string>
#include <string_view>

namespace repro::norm {

// Canonical composition (NFC) of well-formed UTF-8 input. Throws
// std::invalid_argument on malformed input.
std::string nfc(std::string_view utf8_text);

}  // namespace repro::norm
