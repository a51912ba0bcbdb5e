#include "seqsynth/dsl.hpp"

#include <cctype>

#include "seqsynth/rng.hpp"

namespace seqsynth::dsl {

namespace {

constexpr std::array<int, kOpCount> kArity = {0, 0, 0, 0, 0, 2, 2, 2, 2, 2, 3, 3, 5, 2};

constexpr std::array<std::string_view, kOpCount> kName = {
    "0",   "1",    "2",    "x",   "y",    "add",  "sub",
    "mul", "div",  "mod",  "cond", "loop", "loop2", "compr"};

}  // namespace

int arity(Op op) { return kArity[static_cast<int>(op)]; }

std::string_view op_name(Op op) { return kName[static_cast<int>(op)]; }

bool higher_order_slot(Op op, int slot) {
  switch (op) {
    case Op::Loop:
    case Op::Compr:
      return slot == 0;
    case Op::Loop2:
      return slot == 0 || slot == 1;
    default:
      return false;
  }
}

Program Program::leaf(Op op) { return make(op, {}); }

Program Program::make(Op op, std::vector<Program> children) {
  if (static_cast<int>(children.size()) != arity(op))
    throw std::invalid_argument("wrong number of children for " + std::string(op_name(op)));

  std::uint64_t sz = 1;
  bool free_y = op == Op::VarY;
  std::uint64_t h = rng::splitmix64(static_cast<std::uint64_t>(op) + 0x9e00);
  for (std::size_t i = 0; i < children.size(); ++i) {
    const Program& c = children[i];
    if (!c.valid()) throw std::invalid_argument("null child program");
    sz += c.size();
    // A y under a lambda binder is bound by that lambda, not free.
    if (!higher_order_slot(op, static_cast<int>(i))) free_y = free_y || c.free_y();
    h = rng::splitmix64(h ^ (c.hash() + 0x9e3779b97f4a7c15ull + (h << 6)));
  }
  if (sz > kMaxProgramSize) throw std::length_error("program exceeds size cap");

  auto node = std::make_shared<detail::Node>();
  node->op = op;
  node->children = std::move(children);
  node->size = static_cast<std::uint32_t>(sz);
  node->free_y = free_y;
  node->hash = h;
  return Program(std::move(node));
}

bool Program::operator==(const Program& other) const {
  if (node_ == other.node_) return true;
  if (!node_ || !other.node_) return false;
  if (node_->hash != other.node_->hash || node_->size != other.node_->size ||
      node_->op != other.node_->op)
    return false;
  for (std::size_t i = 0; i < node_->children.size(); ++i)
    if (!(node_->children[i] == other.node_->children[i])) return false;
  return true;
}

namespace {

// Pre-order token comparison between equally sized programs.
std::strong_ordering compare_structure(const Program& a, const Program& b) {
  if (a.node() == b.node()) return std::strong_ordering::equal;
  if (auto c = a.op() <=> b.op(); c != 0) return c;
  for (int i = 0; i < a.child_count(); ++i)
    if (auto c = compare_structure(a.child(i), b.child(i)); c != 0) return c;
  return std::strong_ordering::equal;
}

}  // namespace

std::strong_ordering compare(const Program& a, const Program& b) {
  if (auto c = a.size() <=> b.size(); c != 0) return c;
  return compare_structure(a, b);
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Program run() {
    Program p = parse_program();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input after program");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(message + " at offset " + std::to_string(pos_), pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Program parse_program() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected program");
    char c = text_[pos_];
    switch (c) {
      case '0': ++pos_; return Program::leaf(Op::Zero);
      case '1': ++pos_; return Program::leaf(Op::One);
      case '2': ++pos_; return Program::leaf(Op::Two);
      case 'x': ++pos_; return Program::leaf(Op::VarX);
      case 'y': ++pos_; return Program::leaf(Op::VarY);
      default: break;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("expected operator name");
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_]))))
      ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);
    Op op{};
    bool found = false;
    for (Op candidate : all_ops()) {
      if (arity(candidate) > 0 && op_name(candidate) == name) {
        op = candidate;
        found = true;
        break;
      }
    }
    if (!found) {
      pos_ = start;
      fail("unknown operator '" + std::string(name) + "'");
    }
    skip_ws();
    if (!eat('(')) fail("expected '(' after '" + std::string(name) + "'");
    std::vector<Program> children;
    children.reserve(static_cast<std::size_t>(arity(op)));
    for (int i = 0; i < arity(op); ++i) {
      if (i > 0) {
        skip_ws();
        if (!eat(',')) fail("expected ','");
      }
      children.push_back(parse_program());
    }
    skip_ws();
    if (!eat(')')) fail("expected ')'");
    return Program::make(op, std::move(children));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void print_into(const Program& p, std::string& out) {
  out += op_name(p.op());
  if (p.child_count() == 0) return;
  out += '(';
  for (int i = 0; i < p.child_count(); ++i) {
    if (i > 0) out += ',';
    print_into(p.child(i), out);
  }
  out += ')';
}

void linearize_into(const Program& p, std::vector<Op>& out) {
  for (int i = 0; i < p.child_count(); ++i) linearize_into(p.child(i), out);
  out.push_back(p.op());
}

}  // namespace

Program parse(std::string_view text) { return Parser(text).run(); }

std::string print(const Program& p) {
  std::string out;
  out.reserve(p.size() * 4);
  print_into(p, out);
  return out;
}

std::vector<Op> linearize(const Program& p) {
  std::vector<Op> out;
  out.reserve(p.size());
  linearize_into(p, out);
  return out;
}

}  // namespace seqsynth::dsl
