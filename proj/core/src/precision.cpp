#include "kolnet/precision.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kolnet {

Rat parse_rational(std::string_view text) {
  std::string s(text);
  if (s.empty()) throw std::invalid_argument("empty rational");
  auto slash = s.find('/');
  auto dot = s.find('.');
  try {
    if (slash != std::string::npos) {
      BigInt num(s.substr(0, slash));
      BigInt den(s.substr(slash + 1));
      if (den == 0) throw std::invalid_argument("zero denominator");
      return Rat(num, den);
    }
    if (dot != std::string::npos) {
      std::string intpart = s.substr(0, dot);
      std::string frac = s.substr(dot + 1);
      if (frac.empty()) throw std::invalid_argument("bad decimal");
      bool neg = !intpart.empty() && intpart[0] == '-';
      if (neg || (!intpart.empty() && intpart[0] == '+')) {
        intpart = intpart.substr(1);
      }
      BigInt num = intpart.empty() ? BigInt(0) : BigInt(intpart);
      BigInt den = 1;
      for (char c : frac) {
        if (c < '0' || c > '9') throw std::invalid_argument("bad decimal");
        num = num * 10 + (c - '0');
        den *= 10;
      }
      Rat r(num, den);
      return neg ? -r : r;
    }
    return Rat(BigInt(s));
  } catch (const std::exception&) {
    throw std::invalid_argument("bad rational: " + s);
  }
}

std::string format_rational(const Rat& r) {
  std::ostringstream os;
  os << numerator(r);
  if (denominator(r) != 1) os << '/' << denominator(r);
  return os.str();
}

double to_double(const Rat& r) { return r.convert_to<double>(); }

BigInt pow_int(const BigInt& base, unsigned exp) {
  BigInt result = 1, b = base;
  unsigned e = exp;
  while (e) {
    if (e & 1) result *= b;
    b *= b;
    e >>= 1;
  }
  return result;
}

Rat pow_rat(const Rat& base, unsigned exp) {
  return Rat(pow_int(numerator(base), exp), pow_int(denominator(base), exp));
}

double log2_bigint(const BigInt& n) {
  if (n <= 0) throw std::domain_error("log2 of non-positive value");
  size_t bits = msb(n);  // floor(log2 n)
  if (bits <= 52) return std::log2(n.convert_to<double>());
  // Keep the top 64 bits for the mantissa.
  BigInt top = n >> (bits - 52);
  return double(bits - 52) + std::log2(top.convert_to<double>());
}

double log2_rational(const Rat& r) {
  if (r <= 0) throw std::domain_error("log2 of non-positive value");
  return log2_bigint(numerator(r)) - log2_bigint(denominator(r));
}

PrecisionSpec PrecisionSpec::make(const Rat& delta, const Rat& magnitude,
                                  const Rat& activation) {
  if (delta <= 0 || magnitude <= 0 || activation <= 0) {
    throw std::invalid_argument("precision: all parameters must be positive");
  }
  if (delta > magnitude) {
    throw std::invalid_argument("precision: delta must not exceed M");
  }
  Rat mq = magnitude / delta;
  Rat aq = activation / delta;
  if (denominator(mq) != 1) {
    throw std::invalid_argument("precision: M must be a multiple of delta");
  }
  if (denominator(aq) != 1) {
    throw std::invalid_argument("precision: A must be a multiple of delta");
  }
  PrecisionSpec spec;
  spec.delta_ = delta;
  spec.magnitude_ = magnitude;
  spec.activation_ = activation;
  spec.mag_quanta_ = numerator(mq).convert_to<int64_t>();
  spec.act_quanta_ = numerator(aq).convert_to<int64_t>();
  return spec;
}

PrecisionSpec PrecisionSpec::parse(std::string_view text) {
  std::string s(text);
  if (s == "ternary") return ternary();
  if (s == "int8") return int8();
  if (s == "dyadic") return dyadic();
  std::istringstream is(s);
  std::string tok;
  std::optional<Rat> delta, mag, act;
  while (is >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("precision spec: expected key=value");
    }
    std::string key = tok.substr(0, eq);
    Rat val = parse_rational(tok.substr(eq + 1));
    if (key == "delta") {
      delta = val;
    } else if (key == "M") {
      mag = val;
    } else if (key == "A") {
      act = val;
    } else {
      throw std::invalid_argument("precision spec: unknown key " + key);
    }
  }
  if (!delta || !mag) {
    throw std::invalid_argument("precision spec: delta and M required");
  }
  return act ? make(*delta, *mag, *act) : make(*delta, *mag);
}

std::string PrecisionSpec::to_string() const {
  return "delta=" + format_rational(delta_) + " M=" +
         format_rational(magnitude_) + " A=" + format_rational(activation_);
}

std::vector<Rat> PrecisionSpec::value_alphabet() const {
  std::vector<Rat> out;
  out.reserve(alphabet_size());
  for (int64_t q = -mag_quanta_; q <= mag_quanta_; ++q) {
    if (q != 0) out.push_back(quanta_to_value(q));
  }
  return out;
}

bool PrecisionSpec::representable(const Rat& v) const {
  Rat q = v / delta_;
  if (denominator(q) != 1) return false;
  BigInt n = numerator(q);
  return n >= -mag_quanta_ && n <= mag_quanta_;
}

int64_t PrecisionSpec::value_to_quanta(const Rat& v) const {
  if (!representable(v)) {
    throw std::invalid_argument("value not representable: " +
                                format_rational(v) + " under " + to_string());
  }
  Rat q = v / delta_;
  BigInt n = numerator(q);
  return n.convert_to<int64_t>();
}

uint64_t PrecisionSpec::quanta_to_index(int64_t q) const {
  if (q == 0 || q < -mag_quanta_ || q > mag_quanta_) {
    throw std::invalid_argument("quanta outside alphabet");
  }
  return q < 0 ? uint64_t(q + mag_quanta_) : uint64_t(q + mag_quanta_ - 1);
}

int64_t PrecisionSpec::index_to_quanta(uint64_t idx) const {
  if (idx >= alphabet_size()) {
    throw std::invalid_argument("alphabet index out of range");
  }
  int64_t q = int64_t(idx) - mag_quanta_;
  return q < 0 ? q : q + 1;
}

Preset PrecisionSpec::preset() const {
  if (*this == ternary()) return Preset::ternary;
  if (*this == int8()) return Preset::int8;
  if (*this == dyadic()) return Preset::dyadic;
  return Preset::custom;
}

ParamVector ParamVector::from_values(const PrecisionSpec& spec,
                                     const std::vector<Rat>& values) {
  ParamVector theta{spec, {}};
  theta.quanta.reserve(values.size());
  for (const Rat& v : values) theta.quanta.push_back(spec.value_to_quanta(v));
  return theta;
}

std::vector<Rat> ParamVector::values() const {
  std::vector<Rat> out;
  out.reserve(quanta.size());
  for (int64_t q : quanta) out.push_back(spec.quanta_to_value(q));
  return out;
}

size_t l0_norm(const ParamVector& theta) {
  size_t w = 0;
  for (int64_t q : theta.quanta) w += (q != 0);
  return w;
}

Rat lp_norm_pow(const ParamVector& theta, unsigned p) {
  if (p < 1) throw std::invalid_argument("lp_norm_pow needs p >= 1");
  // Sum |q_i|^p in integers, then scale by delta^p once.
  BigInt sum = 0;
  for (int64_t q : theta.quanta) {
    if (q == 0) continue;
    sum += pow_int(BigInt(q < 0 ? -q : q), p);
  }
  return Rat(sum) * pow_rat(theta.spec.delta(), p);
}

double lp_norm(const ParamVector& theta, double p) {
  if (p == 0.0) return double(l0_norm(theta));
  if (p < 1.0) throw std::invalid_argument("p in (0,1) rejected (not a norm)");
  double ip;
  if (std::modf(p, &ip) == 0.0 && p <= 64.0) {
    Rat powed = lp_norm_pow(theta, unsigned(ip));
    if (powed == 0) return 0.0;
    return std::exp2(log2_rational(powed) / p);
  }
  double sum = 0.0;
  for (int64_t q : theta.quanta) {
    if (q == 0) continue;
    sum += std::pow(std::abs(to_double(theta.spec.quanta_to_value(q))), p);
  }
  return std::pow(sum, 1.0 / p);
}

CollapseCheck collapse_check(const ParamVector& theta, unsigned p) {
  if (p < 1) throw std::invalid_argument("collapse_check needs p >= 1");
  CollapseCheck out;
  Rat w(l0_norm(theta));
  out.lower = pow_rat(theta.spec.delta(), p) * w;
  out.value = lp_norm_pow(theta, p);
  out.upper = pow_rat(theta.spec.magnitude(), p) * w;
  out.holds = out.lower <= out.value && out.value <= out.upper;
  return out;
}

KInterval lp_transfer_bounds(const Rat& np_value, unsigned p,
                             const PrecisionSpec& spec, double c_u,
                             double c_d) {
  if (np_value < 0) throw std::invalid_argument("norm value must be >= 0");
  KInterval out{0.0, 0.0};
  Rat powed = pow_rat(np_value, p);
  Rat dp = pow_rat(spec.delta(), p);
  Rat mp = pow_rat(spec.magnitude(), p);
  out.k_lower = std::max(0.0, to_double(powed / mp) - c_u);
  if (powed == 0) {
    out.k_upper = c_d;
  } else {
    Rat scaled = powed / dp;  // N_p^p / delta^p
    out.k_upper =
        (c_d / to_double(dp)) * to_double(powed) * log2_rational(scaled) + c_d;
  }
  return out;
}

}  // namespace kolnet
