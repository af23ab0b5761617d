#pragma once

#include <string>
#include <string_view>

namespace corelw {

// Classic Porter suffix-stripping stemmer (the 1980 algorithm). Expects a
// lowercase ASCII word; words of length <= 2 and non-alphabetic input are
// returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace corelw
