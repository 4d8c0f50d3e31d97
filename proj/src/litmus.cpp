#include "persival/litmus.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace persival::litmus {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

uint64_t parse_u64(std::string_view tok, size_t line, const char* what) {
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(line, std::string("expected a non-negative integer for ") + what);
  return value;
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

enum class Section { None, Locations, Thread, Post };

const char* persist_kind_name(PersistKind k) {
  switch (k) {
    case PersistKind::Clflush: return "clflush";
    case PersistKind::Cvap: return "cvap";
    case PersistKind::Cvac: return "cvac";
  }
  return "?";
}

const char* barrier_kind_name(BarrierKind k) {
  return k == BarrierKind::DsbSy ? "dsb_sy" : "sfence";
}

}  // namespace

ParseError::ParseError(size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

const LocationDecl* LitmusTest::find_location(std::string_view name) const {
  for (const auto& decl : locations)
    if (decl.name == name) return &decl;
  return nullptr;
}

LitmusTest parse_litmus(std::string_view text) {
  LitmusTest test;
  bool iterations_seen = false;
  Section section = Section::None;

  auto require_declared = [&](std::string_view name, size_t line) {
    if (!test.find_location(name))
      throw ParseError(line, "undeclared location '" + std::string(name) + "'");
  };

  size_t lineno = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++lineno;

    if (size_t hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(lineno, "unterminated section header");
      std::string_view inside = trim(line.substr(1, line.size() - 2));
      if (inside == "locations") {
        section = Section::Locations;
      } else if (inside == "post") {
        section = Section::Post;
      } else if (inside.substr(0, 6) == "thread") {
        auto toks = split_ws(inside);
        if (toks.size() != 2 || toks[0] != "thread")
          throw ParseError(lineno, "malformed thread header, expected [thread N]");
        uint64_t idx = parse_u64(toks[1], lineno, "thread index");
        if (idx != test.threads.size())
          throw ParseError(lineno, "thread sections must be numbered consecutively from 0");
        test.threads.emplace_back();
        section = Section::Thread;
      } else {
        throw ParseError(lineno, "unknown section '" + std::string(inside) + "'");
      }
      continue;
    }

    switch (section) {
      case Section::None: {
        size_t eq = line.find('=');
        if (eq == std::string_view::npos)
          throw ParseError(lineno, "expected 'iterations = N' or a section header");
        std::string_view key = trim(line.substr(0, eq));
        std::string_view val = trim(line.substr(eq + 1));
        if (key != "iterations")
          throw ParseError(lineno, "unknown top-level key '" + std::string(key) + "'");
        if (iterations_seen) throw ParseError(lineno, "iterations specified twice");
        test.iterations = parse_u64(val, lineno, "iterations");
        iterations_seen = true;
        break;
      }
      case Section::Locations: {
        auto toks = split_ws(line);
        if (toks.empty()) break;
        LocationDecl decl;
        if (!valid_name(toks[0]))
          throw ParseError(lineno, "invalid location name '" + std::string(toks[0]) + "'");
        decl.name = std::string(toks[0]);
        if (test.find_location(decl.name))
          throw ParseError(lineno, "location '" + decl.name + "' declared twice");
        bool size_seen = false, ratio_seen = false;
        for (size_t i = 1; i < toks.size(); ++i) {
          size_t eq = toks[i].find('=');
          if (eq == std::string_view::npos)
            throw ParseError(lineno, "expected key=value in location declaration");
          std::string_view key = toks[i].substr(0, eq);
          std::string_view val = toks[i].substr(eq + 1);
          if (key == "size") {
            decl.size_bytes = parse_u64(val, lineno, "size");
            size_seen = true;
          } else if (key == "ratio") {
            decl.ratio = static_cast<uint32_t>(parse_u64(val, lineno, "ratio"));
            ratio_seen = true;
          } else if (key == "aligned") {
            if (val == "true") decl.aligned = true;
            else if (val == "false") decl.aligned = false;
            else throw ParseError(lineno, "aligned must be true or false");
          } else {
            throw ParseError(lineno, "unknown location key '" + std::string(key) + "'");
          }
        }
        if (!size_seen || decl.size_bytes == 0)
          throw ParseError(lineno, "location '" + decl.name + "' needs size >= 1");
        if (!ratio_seen || decl.ratio == 0)
          throw ParseError(lineno, "location '" + decl.name + "' needs ratio >= 1");
        for (const auto& other : test.locations)
          if (other.ratio == decl.ratio)
            throw ParseError(lineno, "duplicate preamble ratio " + std::to_string(decl.ratio) +
                                         " for locations '" + other.name + "' and '" + decl.name + "'");
        test.locations.push_back(std::move(decl));
        break;
      }
      case Section::Thread: {
        auto toks = split_ws(line);
        auto& body = test.threads.back();
        if (toks[0] == "write") {
          if (toks.size() != 3) throw ParseError(lineno, "expected: write <loc> <value|counter>");
          require_declared(toks[1], lineno);
          Write w;
          w.loc = std::string(toks[1]);
          if (toks[2] == "counter") w.counter = true;
          else w.value = parse_u64(toks[2], lineno, "write value");
          body.emplace_back(std::move(w));
        } else if (toks[0] == "persist") {
          if (toks.size() != 3) throw ParseError(lineno, "expected: persist <clflush|cvap|cvac> <loc>");
          Persist p;
          if (toks[1] == "clflush") p.kind = PersistKind::Clflush;
          else if (toks[1] == "cvap") p.kind = PersistKind::Cvap;
          else if (toks[1] == "cvac") p.kind = PersistKind::Cvac;
          else throw ParseError(lineno, "unknown persist kind '" + std::string(toks[1]) + "'");
          require_declared(toks[2], lineno);
          p.loc = std::string(toks[2]);
          body.emplace_back(std::move(p));
        } else if (toks[0] == "barrier") {
          if (toks.size() != 2) throw ParseError(lineno, "expected: barrier <dsb_sy|sfence>");
          Barrier b;
          if (toks[1] == "dsb_sy") b.kind = BarrierKind::DsbSy;
          else if (toks[1] == "sfence") b.kind = BarrierKind::Sfence;
          else throw ParseError(lineno, "unknown barrier kind '" + std::string(toks[1]) + "'");
          body.emplace_back(b);
        } else if (toks[0] == "sleep") {
          if (toks.size() != 2) throw ParseError(lineno, "expected: sleep <nanoseconds>");
          body.emplace_back(Sleep{parse_u64(toks[1], lineno, "sleep duration")});
        } else {
          throw ParseError(lineno, "unknown instruction '" + std::string(toks[0]) + "'");
        }
        break;
      }
      case Section::Post: {
        size_t arrow = line.find("->");
        if (arrow == std::string_view::npos)
          throw ParseError(lineno, "expected: <loc>==<value> -> <loc>==<value>");
        auto parse_side = [&](std::string_view side, std::string& loc, uint64_t& value) {
          size_t eq = side.find("==");
          if (eq == std::string_view::npos)
            throw ParseError(lineno, "expected <loc>==<value> in post condition");
          std::string_view name = trim(side.substr(0, eq));
          require_declared(name, lineno);
          loc = std::string(name);
          value = parse_u64(trim(side.substr(eq + 2)), lineno, "post-condition value");
        };
        Implication imp;
        parse_side(trim(line.substr(0, arrow)), imp.lhs_loc, imp.lhs_value);
        parse_side(trim(line.substr(arrow + 2)), imp.rhs_loc, imp.rhs_value);
        test.post.implications.push_back(std::move(imp));
        break;
      }
    }
  }

  if (!iterations_seen) throw ParseError(lineno, "iterations not specified");
  if (test.iterations == 0) throw ParseError(lineno, "iterations must be at least 1");
  if (test.threads.empty()) throw ParseError(lineno, "a litmus test needs at least one [thread N] section");
  bool any_write = false;
  for (const auto& thread : test.threads)
    for (const auto& instr : thread)
      if (std::holds_alternative<Write>(instr)) any_write = true;
  if (!any_write) throw ParseError(lineno, "a litmus test needs at least one write");
  return test;
}

std::string render_litmus(const LitmusTest& test) {
  std::ostringstream out;
  out << "iterations = " << test.iterations << "\n";
  out << "\n[locations]\n";
  for (const auto& decl : test.locations) {
    out << decl.name << " size=" << decl.size_bytes << " ratio=" << decl.ratio;
    if (!decl.aligned) out << " aligned=false";
    out << "\n";
  }
  for (size_t i = 0; i < test.threads.size(); ++i) {
    out << "\n[thread " << i << "]\n";
    for (const auto& instr : test.threads[i]) {
      std::visit(
          [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, Write>) {
              out << "write " << op.loc << " ";
              if (op.counter) out << "counter";
              else out << op.value;
            } else if constexpr (std::is_same_v<T, Persist>) {
              out << "persist " << persist_kind_name(op.kind) << " " << op.loc;
            } else if constexpr (std::is_same_v<T, Barrier>) {
              out << "barrier " << barrier_kind_name(op.kind);
            } else {
              out << "sleep " << op.duration_ns;
            }
          },
          instr);
      out << "\n";
    }
  }
  if (!test.post.implications.empty()) {
    out << "\n[post]\n";
    for (const auto& imp : test.post.implications)
      out << imp.lhs_loc << "==" << imp.lhs_value << " -> " << imp.rhs_loc << "==" << imp.rhs_value << "\n";
  }
  return out.str();
}

PersistPattern expected_pattern(const LitmusTest& test) {
  if (test.threads.size() != 1)
    throw PatternError("persist pattern is only defined for single-threaded tests");
  const auto& body = test.threads[0];

  PersistPattern pattern;
  pattern.iterations = test.iterations;
  for (size_t i = 0; i < body.size(); ++i) {
    const Write* w = std::get_if<Write>(&body[i]);
    if (!w) continue;
    // The write must be persisted and fenced before the next write.
    bool persisted = false, fenced = false;
    for (size_t j = i + 1; j < body.size() && !fenced; ++j) {
      if (std::holds_alternative<Write>(body[j])) break;
      if (const Persist* p = std::get_if<Persist>(&body[j]); p && p->loc == w->loc) persisted = true;
      if (persisted && std::holds_alternative<Barrier>(body[j])) fenced = true;
    }
    if (!fenced)
      throw PatternError("write to '" + w->loc +
                         "' is not followed by a persist and barrier before the next write");
    pattern.tokens.push_back(w->loc);
  }
  if (pattern.tokens.empty()) throw PatternError("test body contains no writes");
  return pattern;
}

}  // namespace persival::litmus
