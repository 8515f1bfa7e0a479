#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "actree/grammar/tree.hpp"

namespace actree::corpus {

enum class Source { generated, rephrase, prompt, interactive };

std::string_view to_string(Source source);
Source parse_source(std::string_view text);

struct Example {
  std::vector<std::string> sentence;
  grammar::ActionTree tree;
  Source source = Source::generated;
  std::string origin;  // template id for generated examples
};

}  // namespace actree::corpus
