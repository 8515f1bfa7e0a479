#include "actree/templates/library.hpp"

#include <algorithm>
#include <exception>
#include <functional>
#include <set>

#include "actree/grammar/document.hpp"
#include "actree/grammar/tree.hpp"
#include "actree/util/digest.hpp"
#include "actree/util/random.hpp"
#include "actree/util/text.hpp"

namespace actree::templates {

using grammar::NodeKind;

TemplateParseError::TemplateParseError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

TemplateError::TemplateError(std::string id, const std::string& message)
    : std::runtime_error(id + ": " + message), id_(std::move(id)) {}

const Template& TemplateLibrary::find(std::string_view id) const {
  for (const auto& t : templates)
    if (t.id == id) return t;
  throw std::out_of_range("no template '" + std::string(id) + "'");
}

namespace {

bool is_placeholder(std::string_view word) {
  return word.size() > 2 && word.front() == '{' && word.back() == '}';
}

std::string placeholder_name(std::string_view word) { return std::string(word.substr(1, word.size() - 2)); }

Realization parse_realization(std::string_view text, std::size_t line_no) {
  Realization r;
  std::string_view surface = text, rhs;
  if (auto arrow = text.find("=>"); arrow != std::string_view::npos) {
    surface = text.substr(0, arrow);
    rhs = text.substr(arrow + 2);
  }
  for (const auto& word : util::split_whitespace(surface)) {
    if (is_placeholder(word)) {
      r.pieces.push_back({{}, placeholder_name(word)});
      continue;
    }
    auto tokens = grammar::tokenize(word);
    if (tokens.empty()) continue;
    if (r.pieces.empty() || !r.pieces.back().pool.empty()) r.pieces.push_back({});
    auto& piece = r.pieces.back().tokens;
    piece.insert(piece.end(), tokens.begin(), tokens.end());
  }
  if (r.pieces.empty()) throw TemplateParseError(line_no, "empty surface fragment");
  for (const auto& item : util::split_whitespace(rhs)) {
    Assignment a;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      a.node = item;
    } else {
      a.node = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      if (value.empty()) throw TemplateParseError(line_no, "missing value for " + a.node);
      if (is_placeholder(value)) {
        a.kind = Assignment::Kind::span;
        a.value = placeholder_name(value);
      } else {
        a.kind = Assignment::Kind::label;
        a.value = value;
      }
    }
    r.assignments.push_back(std::move(a));
  }
  return r;
}

void check_object(const TemplateObject& obj, const TemplateLibrary& lib) {
  if (obj.realizations.empty()) throw TemplateError(obj.id, "object has no realizations");
  for (const auto& r : obj.realizations) {
    std::map<std::string, int> placeholders;
    for (const auto& p : r.pieces) {
      if (p.pool.empty()) continue;
      auto it = lib.pools.find(p.pool);
      if (it == lib.pools.end()) throw TemplateError(obj.id, "unknown value pool '" + p.pool + "'");
      if (++placeholders[p.pool] > 1) throw TemplateError(obj.id, "placeholder {" + p.pool + "} used twice");
    }
    if (obj.linguistic_only && !r.assignments.empty())
      throw TemplateError(obj.id, "linguistic object assigns tree content");
    if (!obj.linguistic_only && r.assignments.empty())
      throw TemplateError(obj.id, "realization touches no tree node");
    for (const auto& a : r.assignments) {
      auto idx = lib.schema.find(a.node);
      if (!idx) throw TemplateError(obj.id, "unknown node '" + a.node + "'");
      const auto kind = lib.schema.kind(*idx);
      switch (a.kind) {
        case Assignment::Kind::activate:
          if (kind != NodeKind::internal) throw TemplateError(obj.id, a.node + " needs a value");
          break;
        case Assignment::Kind::label:
          if (kind != NodeKind::categorical) throw TemplateError(obj.id, a.node + " is not categorical");
          if (lib.schema.label_index(*idx, a.value) < 0)
            throw TemplateError(obj.id, "unknown label '" + a.value + "' for " + a.node);
          break;
        case Assignment::Kind::span:
          if (kind != NodeKind::span) throw TemplateError(obj.id, a.node + " is not a span node");
          if (!placeholders.contains(a.value))
            throw TemplateError(obj.id, "span " + a.node + " refers to {" + a.value + "}, absent from the surface");
          break;
      }
    }
  }
}

/// Builds the example for fixed realization choices; `pick_value` chooses a
/// value index within a pool.
corpus::Example compose(const Template& tmpl, const TemplateLibrary& lib, const std::vector<std::size_t>& choices,
                        const std::function<std::size_t(std::size_t)>& pick_value, SpanWords* span_words) {
  corpus::Example e;
  e.origin = tmpl.id;
  e.source = corpus::Source::generated;
  e.tree = grammar::make_tree(lib.schema, 0);
  for (std::size_t slot = 0; slot < tmpl.slots.size(); ++slot) {
    const auto& r = lib.objects.at(tmpl.slots[slot]).realizations[choices[slot]];
    std::map<std::string, grammar::Span> emitted;
    std::map<std::string, const std::vector<std::string>*> chosen;
    for (const auto& p : r.pieces) {
      if (p.pool.empty()) {
        e.sentence.insert(e.sentence.end(), p.tokens.begin(), p.tokens.end());
        continue;
      }
      const auto& values = lib.pools.at(p.pool);
      const auto& value = values[pick_value(values.size())];
      const int start = static_cast<int>(e.sentence.size());
      e.sentence.insert(e.sentence.end(), value.begin(), value.end());
      emitted[p.pool] = {start, static_cast<int>(e.sentence.size()) - 1};
      chosen[p.pool] = &value;
    }
    for (const auto& a : r.assignments) {
      grammar::activate_path(e.tree, lib.schema, lib.schema.index_of(a.node));
      if (a.kind == Assignment::Kind::label) {
        auto [it, fresh] = e.tree.labels.emplace(a.node, a.value);
        if (!fresh && it->second != a.value)
          throw TemplateError(tmpl.id, "conflicting labels " + it->second + " and " + a.value + " for " + a.node);
      } else if (a.kind == Assignment::Kind::span) {
        if (e.tree.spans.contains(a.node)) throw TemplateError(tmpl.id, "span " + a.node + " assigned twice");
        const auto span = emitted.at(a.value);
        e.tree.spans[a.node] = span;
        if (span_words) (*span_words)[a.node] = *chosen.at(a.value);
      }
    }
  }
  e.tree.sentence_length = static_cast<int>(e.sentence.size());
  return e;
}

}  // namespace

void verify_template(const Template& tmpl, const TemplateLibrary& library, std::size_t limit) {
  if (tmpl.slots.empty()) throw TemplateError(tmpl.id, "template has no slots");
  std::vector<std::size_t> sizes;
  double combos = 1.0;
  for (const auto& slot : tmpl.slots) {
    sizes.push_back(library.objects.at(slot).realizations.size());
    combos *= static_cast<double>(sizes.back());
  }
  auto first_value = [](std::size_t) -> std::size_t { return 0; };
  auto check = [&](const std::vector<std::size_t>& choices) {
    auto e = compose(tmpl, library, choices, first_value, nullptr);
    auto report = grammar::validate_tree(e.tree, library.schema);
    if (!report.ok) {
      const auto& v = report.violations.front();
      throw TemplateError(tmpl.id, "composed tree is invalid at " + v.node_id + " (" + v.rule + "): " + v.message);
    }
  };
  std::vector<std::size_t> choices(sizes.size(), 0);
  if (combos <= static_cast<double>(limit)) {
    while (true) {
      check(choices);
      std::size_t k = 0;
      while (k < choices.size() && ++choices[k] == sizes[k]) choices[k++] = 0;
      if (k == choices.size()) break;
    }
    return;
  }
  std::mt19937_64 rng(util::fnv1a(tmpl.id));
  for (std::size_t n = 0; n < limit; ++n) {
    for (std::size_t k = 0; k < sizes.size(); ++k) choices[k] = std::uniform_int_distribution<std::size_t>(0, sizes[k] - 1)(rng);
    check(choices);
  }
}

TemplateLibrary parse_template_library(std::string_view text, const grammar::GrammarSchema& schema) {
  TemplateLibrary lib;
  lib.schema = schema;
  struct RawTemplate {
    std::string id;
    std::vector<std::string> slots;
    double weight;
    std::size_t line;
  };
  std::vector<RawTemplate> raw;
  std::set<std::string> template_ids;
  TemplateObject* current = nullptr;
  std::size_t line_no = 0;
  for (const auto& raw_line : util::split(text, '\n')) {
    ++line_no;
    std::string_view line = raw_line;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto body = util::trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (line.front() == ' ' || line.front() == '\t') {
      if (!current) throw TemplateParseError(line_no, "realization outside an object");
      current->realizations.push_back(parse_realization(body, line_no));
      continue;
    }
    current = nullptr;
    auto words = util::split_whitespace(body);
    const auto& keyword = words[0];
    if (keyword == "pool") {
      const auto eq = body.find('=');
      if (words.size() < 4 || words[2] != "=" || eq == std::string_view::npos)
        throw TemplateParseError(line_no, "expected `pool <name> = value | value ...`");
      if (lib.pools.contains(words[1])) throw TemplateParseError(line_no, "duplicate pool '" + words[1] + "'");
      auto& values = lib.pools[words[1]];
      for (const auto& v : util::split(body.substr(eq + 1), '|')) {
        auto tokens = grammar::tokenize(v);
        if (tokens.empty()) throw TemplateParseError(line_no, "empty value in pool '" + words[1] + "'");
        values.push_back(std::move(tokens));
      }
    } else if (keyword == "object") {
      if (words.size() < 2 || words.size() > 3 || (words.size() == 3 && words[2] != "linguistic"))
        throw TemplateParseError(line_no, "expected `object <Id> [linguistic]`");
      if (lib.objects.contains(words[1])) throw TemplateParseError(line_no, "duplicate object '" + words[1] + "'");
      current = &lib.objects[words[1]];
      current->id = words[1];
      current->linguistic_only = words.size() == 3;
    } else if (keyword == "template") {
      RawTemplate t{words.size() > 1 ? words[1] : "", {}, 1.0, line_no};
      std::size_t k = 2;
      if (k < words.size() && words[k].rfind("weight=", 0) == 0) {
        try {
          t.weight = std::stod(words[k].substr(7));
        } catch (const std::exception&) {
          throw TemplateParseError(line_no, "bad weight '" + words[k] + "'");
        }
        if (!(t.weight > 0.0)) throw TemplateParseError(line_no, "weight must be positive");
        ++k;
      }
      if (t.id.empty() || k >= words.size() || words[k] != "=")
        throw TemplateParseError(line_no, "expected `template <id> [weight=w] = slot slot ...`");
      if (!template_ids.insert(t.id).second) throw TemplateParseError(line_no, "duplicate template '" + t.id + "'");
      t.slots.assign(words.begin() + static_cast<long>(k) + 1, words.end());
      raw.push_back(std::move(t));
    } else {
      throw TemplateParseError(line_no, "unknown directive '" + keyword + "'");
    }
  }

  for (const auto& [id, obj] : lib.objects) check_object(obj, lib);

  std::map<std::string, const RawTemplate*> by_id;
  for (const auto& t : raw) by_id[t.id] = &t;
  std::function<void(const RawTemplate&, std::vector<std::string>&, std::vector<std::string>&)> expand =
      [&](const RawTemplate& t, std::vector<std::string>& out, std::vector<std::string>& stack) {
        if (std::find(stack.begin(), stack.end(), t.id) != stack.end())
          throw TemplateError(stack.front(), "template cycle through '" + t.id + "'");
        stack.push_back(t.id);
        for (const auto& slot : t.slots) {
          if (slot.front() == '@') {
            auto it = by_id.find(slot.substr(1));
            if (it == by_id.end()) throw TemplateError(stack.front(), "unknown template '" + slot.substr(1) + "'");
            expand(*it->second, out, stack);
          } else if (!lib.objects.contains(slot)) {
            throw TemplateError(stack.front(), "unknown object '" + slot + "'");
          } else {
            out.push_back(slot);
          }
        }
        stack.pop_back();
      };
  for (const auto& t : raw) {
    Template tmpl{t.id, {}, t.weight};
    std::vector<std::string> stack;
    expand(t, tmpl.slots, stack);
    verify_template(tmpl, lib);
    lib.templates.push_back(std::move(tmpl));
  }
  return lib;
}

TemplateLibrary load_template_library(const std::filesystem::path& path, const grammar::GrammarSchema& schema) {
  try {
    return parse_template_library(util::read_file(path), schema);
  } catch (const TemplateParseError& e) {
    throw TemplateParseError(e.line(), path.string() + ": " + e.what());
  }
}

corpus::Example sample_pair(const Template& tmpl, const TemplateLibrary& library, std::mt19937_64& rng,
                            SpanWords* span_words) {
  // Realization and value draws interleave slot by slot, so a slot's choices
  // are made before the next slot is looked at.
  std::vector<std::size_t> choices(tmpl.slots.size());
  std::vector<std::size_t> values;
  for (std::size_t k = 0; k < tmpl.slots.size(); ++k) {
    const auto& obj = library.objects.at(tmpl.slots[k]);
    choices[k] = std::uniform_int_distribution<std::size_t>(0, obj.realizations.size() - 1)(rng);
    for (const auto& p : obj.realizations[choices[k]].pieces)
      if (!p.pool.empty())
        values.push_back(std::uniform_int_distribution<std::size_t>(0, library.pools.at(p.pool).size() - 1)(rng));
  }
  std::size_t next = 0;
  return compose(tmpl, library, choices, [&](std::size_t) { return values[next++]; }, span_words);
}

std::vector<std::vector<std::string>> parse_noop_lines(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (const auto& line : util::split(text, '\n')) {
    auto tokens = grammar::tokenize(line);
    if (!tokens.empty()) out.push_back(std::move(tokens));
  }
  return out;
}

std::vector<std::vector<std::string>> load_noop_lines(const std::filesystem::path& path) {
  return parse_noop_lines(util::read_file(path));
}

corpus::Example sample_noop(const std::vector<std::vector<std::string>>& lines, const grammar::GrammarSchema& schema,
                            std::mt19937_64& rng) {
  if (lines.empty()) throw std::invalid_argument("the Noop corpus is empty");
  auto head = schema.head();
  if (!head || schema.label_index(*head, "Noop") < 0) throw std::invalid_argument("schema has no Noop action type");
  corpus::Example e;
  e.sentence = lines[std::uniform_int_distribution<std::size_t>(0, lines.size() - 1)(rng)];
  e.tree = grammar::make_tree(schema, static_cast<int>(e.sentence.size()));
  grammar::activate_path(e.tree, schema, *head);
  e.tree.labels[schema.node(*head).id] = "Noop";
  e.origin = "noop";
  return e;
}

namespace {

constexpr std::uint64_t kGenerateSalt = 0x67656e;

void check_generation(const TemplateLibrary& library, const std::vector<std::vector<std::string>>& noop,
                      double noop_fraction) {
  if (!(noop_fraction >= 0.0 && noop_fraction <= 1.0))
    throw std::invalid_argument("noop fraction must lie in [0, 1]");
  if (noop_fraction > 0.0 && noop.empty()) throw std::invalid_argument("the Noop corpus is empty");
  if (noop_fraction < 1.0 && library.templates.empty()) throw std::invalid_argument("the library has no templates");
}

}  // namespace

corpus::Example generate_example(const TemplateLibrary& library, const std::vector<std::vector<std::string>>& noop,
                                 double noop_fraction, std::uint64_t seed, std::uint64_t index) {
  std::mt19937_64 rng(util::stream_seed(seed, index, kGenerateSalt));
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < noop_fraction) return sample_noop(noop, library.schema, rng);
  std::vector<double> weights;
  weights.reserve(library.templates.size());
  for (const auto& t : library.templates) weights.push_back(t.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return sample_pair(library.templates[pick(rng)], library, rng);
}

std::vector<corpus::Example> generate_serial(const TemplateLibrary& library,
                                             const std::vector<std::vector<std::string>>& noop, double noop_fraction,
                                             std::uint64_t seed, std::uint64_t first_index, std::size_t count) {
  check_generation(library, noop, noop_fraction);
  std::vector<corpus::Example> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = generate_example(library, noop, noop_fraction, seed, first_index + i);
  return out;
}

std::vector<corpus::Example> generate_parallel(const TemplateLibrary& library,
                                               const std::vector<std::vector<std::string>>& noop, double noop_fraction,
                                               std::uint64_t seed, std::uint64_t first_index, std::size_t count) {
  check_generation(library, noop, noop_fraction);
  std::vector<corpus::Example> out(count);
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<long>(count);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = generate_example(library, noop, noop_fraction, seed, first_index + static_cast<std::uint64_t>(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

GeneratedSplits generate_splits(const TemplateLibrary& library, const std::vector<std::vector<std::string>>& noop,
                                const SplitCounts& counts, double noop_fraction, std::uint64_t seed, bool parallel) {
  if (counts.train == 0 || counts.valid == 0 || counts.test == 0)
    throw std::invalid_argument("split counts must be positive");
  auto gen = parallel ? generate_parallel : generate_serial;
  GeneratedSplits s;
  s.train = gen(library, noop, noop_fraction, seed, 0, counts.train);
  s.valid = gen(library, noop, noop_fraction, seed, counts.train, counts.valid);
  s.test = gen(library, noop, noop_fraction, seed, counts.train + counts.valid, counts.test);
  return s;
}

}  // namespace actree::templates
