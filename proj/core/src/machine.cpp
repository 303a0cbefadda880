#include "kolnet/machine.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <sstream>
#include <thread>

namespace kolnet {

namespace {

constexpr uint32_t kOpcodeBits = 3;
constexpr uint32_t kRegBits = 2;

bool has_reg(Opcode op) { return op == Opcode::inc || op == Opcode::decjz; }
bool has_addr(Opcode op) { return op == Opcode::decjz || op == Opcode::jmp; }

void append_instruction(BitString& bits, const Instruction& ins) {
  bits.append_uint(uint64_t(ins.op), kOpcodeBits);
  if (has_reg(ins.op)) bits.append_uint(ins.reg, kRegBits);
  if (has_addr(ins.op)) bits.append_elias_delta(uint64_t(ins.addr) + 1);
}

const char* mnemonic(Opcode op) {
  switch (op) {
    case Opcode::halt: return "HALT";
    case Opcode::out0: return "OUT0";
    case Opcode::out1: return "OUT1";
    case Opcode::inc: return "INC";
    case Opcode::decjz: return "DECJZ";
    case Opcode::jmp: return "JMP";
  }
  return "?";
}

}  // namespace

Program program_from_instructions(const std::vector<Instruction>& ins) {
  Program p;
  p.instructions = ins;
  p.bits.append_elias_delta(ins.size());
  for (const Instruction& i : ins) {
    if (i.addr > ins.size() && has_addr(i.op)) {
      throw std::invalid_argument("address out of range");
    }
    append_instruction(p.bits, i);
  }
  return p;
}

Program program_from_bits(const BitString& bits) {
  BitReader r(bits);
  uint64_t count = r.read_elias_delta("count");
  Program p;
  for (uint64_t i = 0; i < count; ++i) {
    Instruction ins;
    uint64_t op = r.read_uint(kOpcodeBits, "opcode");
    if (op > uint64_t(Opcode::jmp)) {
      throw ParseError("opcode", r.position(), "invalid opcode");
    }
    ins.op = Opcode(op);
    if (has_reg(ins.op)) ins.reg = uint8_t(r.read_uint(kRegBits, "register"));
    if (has_addr(ins.op)) {
      uint64_t a = r.read_elias_delta("address");
      if (a - 1 > count) {
        throw ParseError("address", r.position(), "address out of range");
      }
      ins.addr = uint32_t(a - 1);
    }
    p.instructions.push_back(ins);
  }
  if (!r.exhausted()) {
    throw ParseError("program", r.position(), "trailing bits");
  }
  p.bits = bits;
  return p;
}

Program assemble(std::string_view text) {
  std::string norm(text);
  for (char& c : norm) {
    if (c == ';' || c == ',') c = ' ';
  }
  std::istringstream is(norm);
  std::string tok;
  std::vector<std::string> toks;
  while (is >> tok) toks.push_back(tok);

  std::vector<Instruction> ins;
  size_t i = 0;
  auto upper = [](std::string s) {
    for (char& c : s) c = char(std::toupper(uint8_t(c)));
    return s;
  };
  auto need = [&](const char* what) -> std::string {
    if (i >= toks.size()) {
      throw std::invalid_argument(std::string("assemble: missing ") + what);
    }
    return toks[i++];
  };
  auto parse_reg = [&](const std::string& s) -> uint8_t {
    std::string u = upper(s);
    if (u.size() == 2 && u[0] == 'R' && u[1] >= '0' && u[1] <= '3') {
      return uint8_t(u[1] - '0');
    }
    throw std::invalid_argument("assemble: bad register " + s);
  };
  auto parse_addr = [&](const std::string& s) -> uint32_t {
    for (char c : s) {
      if (!std::isdigit(uint8_t(c))) {
        throw std::invalid_argument("assemble: bad address " + s);
      }
    }
    return uint32_t(std::stoul(s));
  };
  while (i < toks.size()) {
    std::string m = upper(toks[i++]);
    Instruction out;
    if (m == "HALT") {
      out.op = Opcode::halt;
    } else if (m == "OUT0") {
      out.op = Opcode::out0;
    } else if (m == "OUT1") {
      out.op = Opcode::out1;
    } else if (m == "INC") {
      out.op = Opcode::inc;
      out.reg = parse_reg(need("register"));
    } else if (m == "DECJZ") {
      out.op = Opcode::decjz;
      out.reg = parse_reg(need("register"));
      out.addr = parse_addr(need("address"));
    } else if (m == "JMP") {
      out.op = Opcode::jmp;
      out.addr = parse_addr(need("address"));
    } else {
      throw std::invalid_argument("assemble: unknown mnemonic " + m);
    }
    ins.push_back(out);
  }
  for (const Instruction& in : ins) {
    if (has_addr(in.op) && in.addr > ins.size()) {
      throw std::invalid_argument("assemble: address out of range");
    }
  }
  return program_from_instructions(ins);
}

std::string disassemble(const Program& p) {
  std::ostringstream os;
  for (const Instruction& in : p.instructions) {
    os << mnemonic(in.op);
    if (has_reg(in.op)) os << " r" << int(in.reg);
    if (has_addr(in.op)) os << " " << in.addr;
    os << "\n";
  }
  return os.str();
}

std::string to_hex_text(const Program& p) { return "rm4:" + p.bits.to_hex(); }

Program from_hex_text(std::string_view text) {
  constexpr std::string_view prefix = "rm4:";
  if (text.substr(0, prefix.size()) != prefix) {
    throw std::invalid_argument("program hex must start with rm4:");
  }
  BitString padded = BitString::from_hex(text.substr(prefix.size()));
  // The format is self-delimiting: parse, then verify only zero padding
  // remains.
  BitReader r(padded);
  uint64_t count = r.read_elias_delta("count");
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t op = r.read_uint(kOpcodeBits, "opcode");
    if (op > uint64_t(Opcode::jmp)) {
      throw ParseError("opcode", r.position(), "invalid opcode");
    }
    if (has_reg(Opcode(op))) r.read_uint(kRegBits, "register");
    if (has_addr(Opcode(op))) r.read_elias_delta("address");
  }
  size_t nbits = r.position();
  if (padded.size() - nbits >= 8) {
    throw ParseError("padding", nbits, "trailing garbage");
  }
  BitString exact;
  for (size_t i = 0; i < nbits; ++i) exact.push_back(padded.at(i));
  for (size_t i = nbits; i < padded.size(); ++i) {
    if (padded.at(i)) throw ParseError("padding", i, "non-zero padding bit");
  }
  return program_from_bits(exact);
}

MachineState machine_step(const Program& p, MachineState s) {
  if (s.halted) return s;
  ++s.steps;
  if (s.pc >= p.instructions.size()) {
    s.halted = true;  // implicit HALT past the last instruction
    return s;
  }
  const Instruction& in = p.instructions[s.pc];
  switch (in.op) {
    case Opcode::halt:
      s.halted = true;
      break;
    case Opcode::out0:
      s.emitted.push_back('0');
      ++s.pc;
      break;
    case Opcode::out1:
      s.emitted.push_back('1');
      ++s.pc;
      break;
    case Opcode::inc:
      ++s.reg[in.reg];
      ++s.pc;
      break;
    case Opcode::decjz:
      if (s.reg[in.reg] > 0) {
        --s.reg[in.reg];
        ++s.pc;
      } else {
        s.pc = in.addr;
      }
      break;
    case Opcode::jmp:
      s.pc = in.addr;
      break;
  }
  return s;
}

RunResult interpret(const Program& p, uint64_t step_budget,
                    uint64_t output_limit) {
  if (step_budget < 1 || output_limit < 1) {
    throw std::invalid_argument("interpret: budgets must be >= 1");
  }
  RunResult result;
  MachineState s;
  while (s.steps < step_budget) {
    s = machine_step(p, s);
    if (s.halted) {
      result.output = std::move(s.emitted);
      result.halted = true;
      result.iterations = s.steps;
      result.reason = StopReason::halted;
      return result;
    }
    if (s.emitted.size() >= output_limit) {
      result.output = std::move(s.emitted);
      result.iterations = s.steps;
      result.reason = StopReason::output_limit;
      return result;
    }
  }
  result.output = std::move(s.emitted);
  result.iterations = s.steps;
  result.reason = StopReason::budget_exhausted;
  return result;
}

namespace {

// Interprets an instruction list checking the output against target;
// returns the step count on exact match. Avoids building Program bits.
std::optional<uint64_t> run_matches(const std::vector<Instruction>& ins,
                                    std::string_view target,
                                    uint64_t step_budget) {
  uint64_t pc = 0, steps = 0;
  uint64_t reg[4] = {0, 0, 0, 0};
  size_t matched = 0;
  while (steps < step_budget) {
    ++steps;
    if (pc >= ins.size()) {
      return matched == target.size() ? std::optional<uint64_t>(steps)
                                      : std::nullopt;
    }
    const Instruction& in = ins[pc];
    switch (in.op) {
      case Opcode::halt:
        return matched == target.size() ? std::optional<uint64_t>(steps)
                                        : std::nullopt;
      case Opcode::out0:
      case Opcode::out1: {
        char c = in.op == Opcode::out1 ? '1' : '0';
        if (matched >= target.size() || target[matched] != c) {
          return std::nullopt;
        }
        ++matched;
        ++pc;
        break;
      }
      case Opcode::inc:
        ++reg[in.reg];
        ++pc;
        break;
      case Opcode::decjz:
        if (reg[in.reg] > 0) {
          --reg[in.reg];
          ++pc;
        } else {
          pc = in.addr;
        }
        break;
      case Opcode::jmp:
        pc = in.addr;
        break;
    }
  }
  return std::nullopt;
}

struct HeaderTask {
  uint64_t n;        // instruction count
  BitString header;  // elias_delta(n)
};

// Headers for a given total length, in lexicographic order of their bits.
std::vector<HeaderTask> headers_for_length(uint64_t len) {
  std::vector<HeaderTask> tasks;
  for (uint64_t n = 1; n * kOpcodeBits + 1 <= len; ++n) {
    BitString h = elias_delta(n);
    if (h.size() + n * kOpcodeBits <= len) tasks.push_back({n, std::move(h)});
  }
  std::sort(tasks.begin(), tasks.end(),
            [](const HeaderTask& a, const HeaderTask& b) {
              return a.header.lex_less(b.header);
            });
  return tasks;
}

// All single-instruction encodings legal for programs of n instructions,
// sorted lexicographically. The encodings are mutually prefix-free.
std::vector<std::pair<BitString, Instruction>> instruction_menu(uint64_t n) {
  std::vector<std::pair<BitString, Instruction>> menu;
  auto add = [&](Instruction ins) {
    BitString b;
    append_instruction(b, ins);
    menu.push_back({std::move(b), ins});
  };
  add({Opcode::halt, 0, 0});
  add({Opcode::out0, 0, 0});
  add({Opcode::out1, 0, 0});
  for (uint8_t r = 0; r < 4; ++r) add({Opcode::inc, r, 0});
  for (uint8_t r = 0; r < 4; ++r) {
    for (uint32_t a = 0; a <= n; ++a) add({Opcode::decjz, r, a});
  }
  for (uint32_t a = 0; a <= n; ++a) add({Opcode::jmp, 0, a});
  std::sort(menu.begin(), menu.end(), [](const auto& a, const auto& b) {
    return a.first.lex_less(b.first);
  });
  return menu;
}

// Enumerates instruction bodies of exactly `bits_left` bits and `count`
// instructions in lexicographic order.
bool enumerate_bodies(
    const std::vector<std::pair<BitString, Instruction>>& menu,
    uint64_t min_len, uint64_t max_len, uint64_t bits_left, uint64_t count,
    std::vector<Instruction>& stack,
    const std::function<bool(const std::vector<Instruction>&)>& visit) {
  if (count == 0) {
    return bits_left == 0 ? visit(stack) : true;
  }
  if (bits_left < count * min_len || bits_left > count * max_len) return true;
  for (const auto& [bits, ins] : menu) {
    if (bits.size() > bits_left) continue;
    uint64_t rest = bits_left - bits.size();
    if (rest < (count - 1) * min_len || rest > (count - 1) * max_len) {
      continue;
    }
    stack.push_back(ins);
    bool keep = enumerate_bodies(menu, min_len, max_len, rest, count - 1,
                                 stack, visit);
    stack.pop_back();
    if (!keep) return false;
  }
  return true;
}

uint64_t menu_max_len(
    const std::vector<std::pair<BitString, Instruction>>& menu) {
  uint64_t m = 0;
  for (const auto& [bits, ins] : menu) m = std::max<uint64_t>(m, bits.size());
  return m;
}

}  // namespace

void enumerate_programs(uint64_t max_len,
                        const std::function<bool(const Program&)>& visit) {
  for (uint64_t len = 1; len <= max_len; ++len) {
    for (const HeaderTask& task : headers_for_length(len)) {
      auto menu = instruction_menu(task.n);
      std::vector<Instruction> stack;
      bool keep = enumerate_bodies(
          menu, kOpcodeBits, menu_max_len(menu), len - task.header.size(),
          task.n, stack, [&](const std::vector<Instruction>& ins) {
            return visit(program_from_instructions(ins));
          });
      if (!keep) return;
    }
  }
}

namespace {

// Candidate found by one worker inside one (length, header) task.
template <typename Value>
struct TaskOutcome {
  bool found = false;
  Value value{};
  std::vector<Instruction> witness;
  uint64_t tried = 0;
};

// Runs tasks of one length level in parallel; task order is the merge order,
// so results are independent of the worker count.
template <typename Value, typename PerBody>
std::vector<TaskOutcome<Value>> run_level(const std::vector<HeaderTask>& tasks,
                                          uint64_t len, unsigned jobs,
                                          const PerBody& per_body) {
  std::vector<TaskOutcome<Value>> outcomes(tasks.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      const HeaderTask& task = tasks[idx];
      auto menu = instruction_menu(task.n);
      std::vector<Instruction> stack;
      enumerate_bodies(menu, kOpcodeBits, menu_max_len(menu),
                       len - task.header.size(), task.n, stack,
                       [&](const std::vector<Instruction>& ins) {
                         return per_body(ins, outcomes[idx]);
                       });
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return outcomes;
}

}  // namespace

SearchResult search_k_upper(std::string_view s, uint64_t max_len,
                            uint64_t step_budget, unsigned jobs) {
  SearchResult result;
  std::string target(s);
  for (uint64_t len = 1; len <= max_len; ++len) {
    auto tasks = headers_for_length(len);
    if (tasks.empty()) continue;
    auto outcomes = run_level<uint64_t>(
        tasks, len, jobs,
        [&](const std::vector<Instruction>& ins, TaskOutcome<uint64_t>& out) {
          ++out.tried;
          if (run_matches(ins, target, step_budget)) {
            out.found = true;
            out.witness = ins;
            return false;  // first hit in lex order within this task
          }
          return true;
        });
    for (const auto& out : outcomes) {
      result.programs_tried += out.tried;
      if (out.found && !result.witness) {
        result.k_hat = len;
        result.witness = program_from_instructions(out.witness);
      }
    }
    if (result.witness) return result;
  }
  return result;
}

KtResult kt_upper(std::string_view s, uint64_t max_len, uint64_t step_budget,
                  unsigned jobs) {
  KtResult result;
  std::string target(s);
  double best = -1.0;
  for (uint64_t len = 1; len <= max_len; ++len) {
    if (best >= 0.0 && best <= double(len)) break;  // |p| alone exceeds best
    auto tasks = headers_for_length(len);
    if (tasks.empty()) continue;
    auto outcomes = run_level<double>(
        tasks, len, jobs,
        [&](const std::vector<Instruction>& ins, TaskOutcome<double>& out) {
          ++out.tried;
          if (auto steps = run_matches(ins, target, step_budget)) {
            double v = double(len) + std::log2(double(*steps));
            if (!out.found || v < out.value) {
              out.found = true;
              out.value = v;
              out.witness = ins;
            }
          }
          return true;  // keep going: later bodies may take fewer steps
        });
    for (const auto& out : outcomes) {
      result.programs_tried += out.tried;
      if (out.found && (best < 0.0 || out.value < best)) {
        best = out.value;
        result.kt_hat = out.value;
        result.witness = program_from_instructions(out.witness);
      }
    }
  }
  return result;
}

}  // namespace kolnet
