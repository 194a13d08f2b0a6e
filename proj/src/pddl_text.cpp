#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pddllm/pddl.hpp"

namespace pddllm::pddl {

std::string Atom::str() const {
  std::string s = "(" + predicate;
  for (const auto& a : args) s += " " + a;
  return s + ")";
}

std::string GroundAction::str() const {
  std::string s = "(" + schema;
  for (const auto& a : args) s += " " + a;
  return s + ")";
}

Condition Condition::make_atom(Atom a) {
  Condition c;
  c.kind = Kind::atom;
  c.atom = std::move(a);
  return c;
}
Condition Condition::make_not(Condition inner) {
  Condition c;
  c.kind = Kind::negation;
  c.children.push_back(std::move(inner));
  return c;
}
Condition Condition::make_and(std::vector<Condition> cs) {
  Condition c;
  c.kind = Kind::conjunction;
  c.children = std::move(cs);
  return c;
}
Condition Condition::make_forall(std::string var, Condition inner) {
  Condition c;
  c.kind = Kind::forall;
  c.variable = std::move(var);
  c.children.push_back(std::move(inner));
  return c;
}

void ActionSchema::validate() const {
  std::set<std::string> bound(params.begin(), params.end());
  auto check_atom = [&](const Atom& atom, const std::set<std::string>& extra) {
    for (const auto& a : atom.args)
      if (a.starts_with("?") && !bound.contains(a) && !extra.contains(a))
        throw std::invalid_argument("action " + name + ": unbound variable " + a +
                                    " in " + atom.str());
  };
  for (const auto& lit : precondition) check_atom(lit.atom, {});
  for (const auto& q : precondition_forall) check_atom(q.literal.atom, {q.variable});
  for (const auto& a : add_effects) check_atom(a, {});
  for (const auto& d : delete_effects) check_atom(d, {});
  for (const auto& a : add_effects)
    for (const auto& d : delete_effects)
      if (a == d)
        throw std::invalid_argument("action " + name + ": " + a.str() +
                                    " appears in both add and delete effects");
}

const PredicateDecl* Domain::find_predicate(const std::string& n) const {
  for (const auto& p : predicates)
    if (p.name == n) return &p;
  return nullptr;
}

const ActionSchema* Domain::find_action(const std::string& n) const {
  for (const auto& a : actions)
    if (a.name == n) return &a;
  return nullptr;
}

void Domain::validate() const {
  std::set<std::string> seen;
  for (const auto& p : predicates)
    if (!seen.insert(p.name).second)
      throw std::invalid_argument("duplicate predicate declaration: " + p.name);

  auto check_atom = [&](const ActionSchema& action, const Atom& atom) {
    const PredicateDecl* decl = find_predicate(atom.predicate);
    if (!decl)
      throw std::invalid_argument("action " + action.name +
                                  " references undeclared predicate " + atom.predicate);
    if (static_cast<int>(atom.args.size()) != decl->arity)
      throw std::invalid_argument("action " + action.name + ": arity mismatch for " +
                                  atom.predicate);
  };
  for (const auto& a : actions) {
    a.validate();
    for (const auto& lit : a.precondition) check_atom(a, lit.atom);
    for (const auto& q : a.precondition_forall) check_atom(a, q.literal.atom);
    for (const auto& atom : a.add_effects) check_atom(a, atom);
    for (const auto& atom : a.delete_effects) check_atom(a, atom);
  }
}

// ---- emit -----------------------------------------------------------------

namespace {

bool uses_negative_preconditions(const Domain& d) {
  for (const auto& a : d.actions) {
    for (const auto& lit : a.precondition)
      if (lit.negated) return true;
    for (const auto& q : a.precondition_forall)
      if (q.literal.negated) return true;
  }
  return false;
}

bool uses_universal_preconditions(const Domain& d) {
  for (const auto& a : d.actions)
    if (!a.precondition_forall.empty()) return true;
  return false;
}

std::string literal_text(const Literal& lit) {
  return lit.negated ? "(not " + lit.atom.str() + ")" : lit.atom.str();
}

std::string condition_text(const Condition& c) {
  switch (c.kind) {
    case Condition::Kind::atom: return c.atom.str();
    case Condition::Kind::negation: return "(not " + condition_text(c.children[0]) + ")";
    case Condition::Kind::conjunction: {
      std::string s = "(and";
      for (const auto& child : c.children) s += " " + condition_text(child);
      return s + ")";
    }
    case Condition::Kind::forall:
      return "(forall (" + c.variable + ") " + condition_text(c.children[0]) + ")";
  }
  return "";
}

Condition sort_condition(const Condition& c) {
  Condition out = c;
  for (auto& child : out.children) child = sort_condition(child);
  if (out.kind == Condition::Kind::conjunction) {
    std::sort(out.children.begin(), out.children.end(),
              [](const Condition& a, const Condition& b) {
                return condition_text(a) < condition_text(b);
              });
  }
  return out;
}

}  // namespace

Domain canonical(const Domain& domain) {
  Domain out = domain;
  std::sort(out.predicates.begin(), out.predicates.end());

  for (auto& action : out.actions) {
    // alpha-rename parameters positionally
    std::map<std::string, std::string> rename;
    for (std::size_t i = 0; i < action.params.size(); ++i)
      rename[action.params[i]] = "?x" + std::to_string(i);
    int quantified = 0;
    auto rewrite_atom = [&](Atom& atom, const std::map<std::string, std::string>& extra) {
      for (auto& a : atom.args) {
        if (auto it = extra.find(a); it != extra.end())
          a = it->second;
        else if (auto it2 = rename.find(a); it2 != rename.end())
          a = it2->second;
      }
    };
    for (auto& p : action.params) p = rename[p];
    for (auto& lit : action.precondition) rewrite_atom(lit.atom, {});
    for (auto& q : action.precondition_forall) {
      const std::string qname = "?q" + std::to_string(quantified++);
      rewrite_atom(q.literal.atom, {{q.variable, qname}});
      q.variable = qname;
    }
    for (auto& a : action.add_effects) rewrite_atom(a, {});
    for (auto& d : action.delete_effects) rewrite_atom(d, {});

    std::sort(action.precondition.begin(), action.precondition.end());
    std::sort(action.precondition_forall.begin(), action.precondition_forall.end());
    std::sort(action.add_effects.begin(), action.add_effects.end());
    std::sort(action.delete_effects.begin(), action.delete_effects.end());
  }
  std::sort(out.actions.begin(), out.actions.end(),
            [](const ActionSchema& a, const ActionSchema& b) { return a.name < b.name; });
  return out;
}

std::string emit_domain(const Domain& raw) {
  const Domain domain = canonical(raw);
  std::ostringstream out;
  out << "(define (domain " << domain.name << ")\n";
  out << "  (:requirements :strips";
  if (uses_negative_preconditions(domain)) out << " :negative-preconditions";
  if (uses_universal_preconditions(domain)) out << " :universal-preconditions";
  out << ")\n";

  out << "  (:predicates";
  for (const auto& p : domain.predicates) {
    out << "\n    (" << p.name;
    for (int i = 0; i < p.arity; ++i) out << " ?x" << i;
    out << ")";
  }
  out << ")\n";

  for (const auto& a : domain.actions) {
    out << "  (:action " << a.name << "\n";
    out << "    :parameters (";
    for (std::size_t i = 0; i < a.params.size(); ++i)
      out << (i ? " " : "") << a.params[i];
    out << ")\n";
    out << "    :precondition (and";
    for (const auto& lit : a.precondition) out << " " << literal_text(lit);
    for (const auto& q : a.precondition_forall)
      out << " (forall (" << q.variable << ") " << literal_text(q.literal) << ")";
    out << ")\n";
    out << "    :effect (and";
    for (const auto& atom : a.add_effects) out << " " << atom.str();
    for (const auto& atom : a.delete_effects) out << " (not " << atom.str() << ")";
    out << "))\n";
  }
  out << ")\n";
  return out.str();
}

std::string emit_problem(const Problem& raw) {
  Problem problem = raw;
  std::sort(problem.objects.begin(), problem.objects.end());
  std::sort(problem.init.begin(), problem.init.end());
  problem.init.erase(std::unique(problem.init.begin(), problem.init.end()),
                     problem.init.end());
  const Condition goal = sort_condition(problem.goal);

  std::ostringstream out;
  out << "(define (problem " << problem.name << ")\n";
  out << "  (:domain " << problem.domain_name << ")\n";
  out << "  (:objects";
  for (const auto& o : problem.objects) out << " " << o;
  out << ")\n";
  out << "  (:init";
  for (const auto& atom : problem.init) out << "\n    " << atom.str();
  out << ")\n";
  out << "  (:goal " << condition_text(goal) << ")\n";
  out << ")\n";
  return out.str();
}

// ---- structural signature ---------------------------------------------

namespace {

std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string structural_signature(const Domain& raw) {
  const Domain domain = canonical(raw);

  // Iterative color refinement over predicate usage so that surface names do
  // not influence the result.
  std::map<std::string, std::uint64_t> color;
  for (const auto& p : domain.predicates) color[p.name] = 17 + p.arity;

  auto action_text = [&](const ActionSchema& a) {
    std::vector<std::string> parts;
    auto atom_token = [&](const Atom& atom, bool negated, const char* role) {
      std::string t = std::string(role) + (negated ? "-" : "+") +
                      std::to_string(color.count(atom.predicate) ? color[atom.predicate] : 0);
      for (const auto& arg : atom.args) t += "." + arg;
      return t;
    };
    for (const auto& lit : a.precondition) parts.push_back(atom_token(lit.atom, lit.negated, "p"));
    for (const auto& q : a.precondition_forall)
      parts.push_back("f" + atom_token(q.literal.atom, q.literal.negated, "p"));
    for (const auto& atom : a.add_effects) parts.push_back(atom_token(atom, false, "a"));
    for (const auto& atom : a.delete_effects) parts.push_back(atom_token(atom, false, "d"));
    std::sort(parts.begin(), parts.end());
    std::string s = "n" + std::to_string(a.params.size());
    for (const auto& p : parts) s += "|" + p;
    return s;
  };

  for (int round = 0; round < 3; ++round) {
    std::map<std::string, std::vector<std::string>> usage;
    for (const auto& a : domain.actions) {
      const std::uint64_t at = hash_str(action_text(a));
      auto record = [&](const Atom& atom, const char* role) {
        usage[atom.predicate].push_back(std::to_string(at) + role);
      };
      for (const auto& lit : a.precondition) record(lit.atom, lit.negated ? "P-" : "P+");
      for (const auto& q : a.precondition_forall)
        record(q.literal.atom, q.literal.negated ? "F-" : "F+");
      for (const auto& atom : a.add_effects) record(atom, "A");
      for (const auto& atom : a.delete_effects) record(atom, "D");
    }
    for (const auto& p : domain.predicates) {
      auto& u = usage[p.name];
      std::sort(u.begin(), u.end());
      std::string acc = std::to_string(color[p.name]);
      for (const auto& item : u) acc += ";" + item;
      color[p.name] = hash_str(acc);
    }
  }

  std::vector<std::string> actions;
  for (const auto& a : domain.actions) actions.push_back(action_text(a));
  std::sort(actions.begin(), actions.end());
  std::vector<std::uint64_t> colors;
  for (const auto& [name, c] : color) colors.push_back(c);
  std::sort(colors.begin(), colors.end());

  std::string sig;
  for (const auto& a : actions) sig += a + "\n";
  for (auto c : colors) sig += std::to_string(c) + ",";
  return std::to_string(hash_str(sig));
}

// ---- parser -----------------------------------------------------------

ParseError::ParseError(const std::string& message, int l, int c)
    : std::runtime_error(message + " at line " + std::to_string(l) + ", column " +
                         std::to_string(c)),
      line(l),
      column(c) {}

namespace {

struct Token {
  enum class Kind { lparen, rparen, symbol, end };
  Kind kind = Kind::end;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    skip_space();
    Token tok;
    tok.line = line_;
    tok.column = column_;
    if (pos_ >= text_.size()) return tok;
    const char c = text_[pos_];
    if (c == '(') {
      advance();
      tok.kind = Token::Kind::lparen;
      tok.text = "(";
      return tok;
    }
    if (c == ')') {
      advance();
      tok.kind = Token::Kind::rparen;
      tok.text = ")";
      return tok;
    }
    tok.kind = Token::Kind::symbol;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != ';') {
      tok.text += static_cast<char>(std::tolower(static_cast<unsigned char>(text_[pos_])));
      advance();
    }
    return tok;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lexer_(text) { shift(); }

  Domain parse_domain() {
    expect_lparen();
    expect_symbol("define");
    expect_lparen();
    expect_symbol("domain");
    Domain domain;
    domain.name = expect_name();
    expect_rparen();

    while (current_.kind == Token::Kind::lparen) {
      const Token open = current_;
      shift();
      const std::string section = expect_name();
      if (section == ":requirements") {
        parse_requirements();
      } else if (section == ":predicates") {
        while (current_.kind == Token::Kind::lparen) {
          const Atom decl = parse_atom();
          domain.predicates.push_back({decl.predicate, static_cast<int>(decl.args.size())});
        }
        expect_rparen();
      } else if (section == ":action") {
        domain.actions.push_back(parse_action());
      } else {
        throw ParseError("unsupported domain section " + section, open.line, open.column);
      }
    }
    expect_rparen();
    expect_end();
    domain.validate();
    return domain;
  }

  Problem parse_problem() {
    expect_lparen();
    expect_symbol("define");
    expect_lparen();
    expect_symbol("problem");
    Problem problem;
    problem.name = expect_name();
    expect_rparen();

    while (current_.kind == Token::Kind::lparen) {
      const Token open = current_;
      shift();
      const std::string section = expect_name();
      if (section == ":domain") {
        problem.domain_name = expect_name();
        expect_rparen();
      } else if (section == ":objects") {
        while (current_.kind == Token::Kind::symbol) problem.objects.push_back(expect_name());
        expect_rparen();
      } else if (section == ":init") {
        while (current_.kind == Token::Kind::lparen) problem.init.push_back(parse_atom());
        expect_rparen();
      } else if (section == ":goal") {
        problem.goal = parse_condition();
        expect_rparen();
      } else {
        throw ParseError("unsupported problem section " + section, open.line, open.column);
      }
    }
    expect_rparen();
    expect_end();
    return problem;
  }

 private:
  void parse_requirements() {
    static const std::set<std::string> supported = {
        ":strips", ":negative-preconditions", ":universal-preconditions"};
    while (current_.kind == Token::Kind::symbol) {
      if (!supported.contains(current_.text))
        throw ParseError("unsupported requirement " + current_.text, current_.line,
                         current_.column);
      shift();
    }
    expect_rparen();
  }

  ActionSchema parse_action() {
    ActionSchema action;
    action.name = expect_name();
    while (current_.kind == Token::Kind::symbol) {
      const std::string key = expect_name();
      if (key == ":parameters") {
        expect_lparen();
        while (current_.kind == Token::Kind::symbol) action.params.push_back(expect_name());
        expect_rparen();
      } else if (key == ":precondition") {
        parse_precondition(action);
      } else if (key == ":effect") {
        parse_effect(action);
      } else {
        throw ParseError("unsupported action key " + key, current_.line, current_.column);
      }
    }
    expect_rparen();
    return action;
  }

  void parse_precondition(ActionSchema& action) {
    const Condition cond = parse_condition();
    flatten_precondition(cond, action);
  }

  void flatten_precondition(const Condition& cond, ActionSchema& action) {
    switch (cond.kind) {
      case Condition::Kind::atom:
        action.precondition.push_back({cond.atom, false});
        return;
      case Condition::Kind::negation:
        if (cond.children[0].kind != Condition::Kind::atom)
          throw ParseError("only literal negation is supported in preconditions", 0, 0);
        action.precondition.push_back({cond.children[0].atom, true});
        return;
      case Condition::Kind::conjunction:
        for (const auto& child : cond.children) flatten_precondition(child, action);
        return;
      case Condition::Kind::forall: {
        const Condition& body = cond.children[0];
        Literal lit;
        if (body.kind == Condition::Kind::atom) {
          lit = {body.atom, false};
        } else if (body.kind == Condition::Kind::negation &&
                   body.children[0].kind == Condition::Kind::atom) {
          lit = {body.children[0].atom, true};
        } else {
          throw ParseError("forall preconditions must quantify a literal", 0, 0);
        }
        action.precondition_forall.push_back({cond.variable, lit});
        return;
      }
    }
  }

  void parse_effect(ActionSchema& action) {
    const Token open = current_;
    expect_lparen();
    const std::string head = expect_name();
    if (head == "and") {
      while (current_.kind == Token::Kind::lparen) parse_single_effect(action);
      expect_rparen();
    } else {
      parse_effect_tail(action, head, open);
    }
  }

  void parse_single_effect(ActionSchema& action) {
    const Token open = current_;
    expect_lparen();
    const std::string head = expect_name();
    parse_effect_tail(action, head, open);
  }

  void parse_effect_tail(ActionSchema& action, const std::string& head, const Token& open) {
    if (head == "not") {
      const Atom atom = parse_atom();
      action.delete_effects.push_back(atom);
      expect_rparen();
    } else if (head == "and" || head == "forall" || head == "when") {
      throw ParseError("unsupported effect construct " + head, open.line, open.column);
    } else {
      Atom atom;
      atom.predicate = head;
      while (current_.kind == Token::Kind::symbol) atom.args.push_back(expect_name());
      expect_rparen();
      action.add_effects.push_back(atom);
    }
  }

  Condition parse_condition() {
    const Token open = current_;
    expect_lparen();
    const std::string head = expect_name();
    if (head == "and") {
      std::vector<Condition> children;
      while (current_.kind == Token::Kind::lparen) children.push_back(parse_condition());
      expect_rparen();
      return Condition::make_and(std::move(children));
    }
    if (head == "not") {
      Condition inner = parse_condition();
      expect_rparen();
      return Condition::make_not(std::move(inner));
    }
    if (head == "forall") {
      expect_lparen();
      const std::string var = expect_name();
      expect_rparen();
      Condition inner = parse_condition();
      expect_rparen();
      return Condition::make_forall(var, std::move(inner));
    }
    if (head == "or" || head == "exists" || head == "imply")
      throw ParseError("unsupported construct " + head, open.line, open.column);

    Atom atom;
    atom.predicate = head;
    while (current_.kind == Token::Kind::symbol) atom.args.push_back(expect_name());
    expect_rparen();
    return Condition::make_atom(std::move(atom));
  }

  Atom parse_atom() {
    expect_lparen();
    Atom atom;
    atom.predicate = expect_name();
    while (current_.kind == Token::Kind::symbol) atom.args.push_back(expect_name());
    expect_rparen();
    return atom;
  }

  void shift() { current_ = lexer_.next(); }
  void expect_lparen() {
    if (current_.kind != Token::Kind::lparen)
      throw ParseError("expected '('", current_.line, current_.column);
    shift();
  }
  void expect_rparen() {
    if (current_.kind != Token::Kind::rparen)
      throw ParseError("expected ')'", current_.line, current_.column);
    shift();
  }
  void expect_symbol(const std::string& s) {
    if (current_.kind != Token::Kind::symbol || current_.text != s)
      throw ParseError("expected '" + s + "'", current_.line, current_.column);
    shift();
  }
  std::string expect_name() {
    if (current_.kind != Token::Kind::symbol)
      throw ParseError("expected a name", current_.line, current_.column);
    std::string s = current_.text;
    shift();
    return s;
  }
  void expect_end() {
    if (current_.kind != Token::Kind::end)
      throw ParseError("trailing input", current_.line, current_.column);
  }

  Lexer lexer_;
  Token current_;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Domain parse_domain(const std::string& text) { return Parser(text).parse_domain(); }
Problem parse_problem(const std::string& text) { return Parser(text).parse_problem(); }
Domain load_domain(const std::string& path) { return parse_domain(read_text(path)); }
Problem load_problem(const std::string& path) { return parse_problem(read_text(path)); }

}  // namespace pddllm::pddl
