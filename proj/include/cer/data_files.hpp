#pragma once

#include <string_view>

namespace cer::data {

// Versioned data files compiled into the library (see data/).
std::string_view stopwords_en();
std::string_view role_text();

}  // namespace cer::data
