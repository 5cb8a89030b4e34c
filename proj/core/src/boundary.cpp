#include "conformal_lab/boundary.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <optional>

#include "conformal_lab/mesh_io.hpp"

namespace conformal_lab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double stage_eval(const CircleHomeo::Stage& s, double theta) {
  return std::visit(
      overloaded{
          [&](const CircleHomeo::Sine& f) { return theta + f.eps * std::sin(f.m * theta); },
          [&](const CircleHomeo::Rotation& f) { return theta + f.alpha; },
          [&](const CircleHomeo::Mobius& f) {
            const Complex u = 1.0 - f.a * std::polar(1.0, -theta);
            return f.alpha + theta + 2.0 * std::atan2(u.imag(), u.real());
          },
      },
      s);
}

double stage_derivative(const CircleHomeo::Stage& s, double theta) {
  return std::visit(
      overloaded{
          [&](const CircleHomeo::Sine& f) { return 1.0 + f.eps * f.m * std::cos(f.m * theta); },
          [&](const CircleHomeo::Rotation&) { return 1.0; },
          [&](const CircleHomeo::Mobius& f) {
            return (1.0 - std::norm(f.a)) / std::norm(std::polar(1.0, theta) - f.a);
          },
      },
      s);
}

double stage_increment(const CircleHomeo::Stage& s, double theta, double t) {
  return std::visit(
      overloaded{
          [&](const CircleHomeo::Sine& f) {
            return t + 2.0 * f.eps * std::cos(f.m * (theta + 0.5 * t)) * std::sin(0.5 * f.m * t);
          },
          [&](const CircleHomeo::Rotation&) { return t; },
          [&](const CircleHomeo::Mobius& f) {
            return stage_eval(CircleHomeo::Stage{f}, theta + t) - stage_eval(CircleHomeo::Stage{f}, theta);
          },
      },
      s);
}

}  // namespace

CircleHomeo::CircleHomeo(std::vector<Stage> stages) : stages_(std::move(stages)) {
  modulus_ = estimate_modulus();
}

CircleHomeo CircleHomeo::sine(double eps, int m) {
  if (m < 1) fail(ErrorKind::domain, "sine family needs a positive integer m");
  if (!(std::abs(eps) * m < 1.0)) {
    fail(ErrorKind::not_homeomorphism,
         "sine family with |eps|*m >= 1 is not a homeomorphism (eps=" + format_double(eps) +
             ", m=" + std::to_string(m) + ")");
  }
  return CircleHomeo({Sine{eps, m}});
}

CircleHomeo CircleHomeo::rotation(double alpha) {
  if (!std::isfinite(alpha)) fail(ErrorKind::domain, "rotation angle must be finite");
  return CircleHomeo({Rotation{alpha}});
}

CircleHomeo CircleHomeo::mobius(Complex a, double alpha) {
  if (!(std::abs(a) < 1.0)) fail(ErrorKind::domain, "Mobius parameter needs |a| < 1");
  return CircleHomeo({Mobius{a, alpha}});
}

CircleHomeo CircleHomeo::then(const CircleHomeo& first, const CircleHomeo& second) {
  std::vector<Stage> s = first.stages_;
  s.insert(s.end(), second.stages_.begin(), second.stages_.end());
  return CircleHomeo(std::move(s));
}

double CircleHomeo::operator()(double theta) const {
  for (const auto& s : stages_) theta = stage_eval(s, theta);
  return theta;
}

double CircleHomeo::derivative(double theta) const {
  double d = 1.0;
  for (const auto& s : stages_) {
    d *= stage_derivative(s, theta);
    theta = stage_eval(s, theta);
  }
  return d;
}

double CircleHomeo::increment(double theta, double t) const {
  for (const auto& s : stages_) {
    const double next_t = stage_increment(s, theta, t);
    theta = stage_eval(s, theta);
    t = next_t;
  }
  return t;
}

Complex CircleHomeo::trace(double theta) const { return std::polar(1.0, (*this)(theta)); }

double CircleHomeo::estimate_modulus() const {
  const int n = kModulusGrid;
  const double step = 2.0 * kPi / n;
  double worst = 1.0;
  for (int i = 0; i < n; ++i) {
    const double theta = i * step;
    for (int span = 1; span <= n / 2; span *= 2) {
      const double t = span * step;
      const double forward = increment(theta, t);
      const double backward = increment(theta - t, t);
      const double q = forward / backward;
      worst = std::max({worst, q, 1.0 / q});
    }
  }
  return worst;
}

std::string CircleHomeo::spec() const {
  std::string out;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    if (i) out += '>';
    out += std::visit(
        overloaded{
            [](const Sine& f) { return "sine:eps=" + format_double(f.eps) + ",m=" + std::to_string(f.m); },
            [](const Rotation& f) { return "rot:alpha=" + format_double(f.alpha); },
            [](const Mobius& f) {
              std::string a = format_double(f.a.real());
              a += (std::signbit(f.a.imag()) ? "-" : "+") + format_double(std::abs(f.a.imag())) + "i";
              return "mobius:a=" + a + ",alpha=" + format_double(f.alpha);
            },
        },
        stages_[i]);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    fail(ErrorKind::parse, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

CircleHomeo parse_stage(std::string_view text) {
  text = trim(text);
  const auto colon = text.find(':');
  const std::string_view family = trim(text.substr(0, colon));
  std::vector<std::pair<std::string, std::string>> kv;
  if (colon != std::string_view::npos) {
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = trim(rest.substr(0, comma));
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) fail(ErrorKind::parse, "expected key=value in '" + std::string(item) + "'");
      kv.emplace_back(std::string(trim(item.substr(0, eq))), std::string(trim(item.substr(eq + 1))));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  auto take = [&](const std::string& key, bool required) -> std::optional<std::string> {
    for (auto it = kv.begin(); it != kv.end(); ++it) {
      if (it->first == key) {
        std::string v = it->second;
        kv.erase(it);
        return v;
      }
    }
    if (required) fail(ErrorKind::parse, "boundary '" + std::string(family) + "' needs " + key);
    return std::nullopt;
  };
  CircleHomeo result = CircleHomeo::identity();
  if (family == "sine") {
    const double eps = parse_real(*take("eps", true));
    const double m = parse_real(*take("m", true));
    if (m != std::floor(m)) fail(ErrorKind::parse, "sine m must be an integer");
    result = CircleHomeo::sine(eps, static_cast<int>(m));
  } else if (family == "rot") {
    result = CircleHomeo::rotation(parse_real(*take("alpha", true)));
  } else if (family == "mobius") {
    const Complex a = parse_complex(*take("a", true));
    const auto alpha = take("alpha", false);
    result = CircleHomeo::mobius(a, alpha ? parse_real(*alpha) : 0.0);
  } else if (family == "identity") {
    result = CircleHomeo::identity();
  } else {
    fail(ErrorKind::parse, "unknown boundary family '" + std::string(family) + "'");
  }
  if (!kv.empty()) fail(ErrorKind::parse, "unknown boundary parameter '" + kv.front().first + "'");
  return result;
}

}  // namespace

Complex parse_complex(std::string_view text) {
  std::string_view s = trim(text);
  if (s.empty()) fail(ErrorKind::parse, "empty complex number");
  if (s.back() != 'i') return Complex(parse_real(s), 0.0);
  s.remove_suffix(1);
  // Split at the last sign that is not part of an exponent.
  std::size_t split = std::string_view::npos;
  for (std::size_t k = s.size(); k-- > 1;) {
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  auto imag_part = [](std::string_view v) {
    if (v == "" || v == "+") return 1.0;
    if (v == "-") return -1.0;
    return parse_real(v);
  };
  if (split == std::string_view::npos) return Complex(0.0, imag_part(s));
  return Complex(parse_real(s.substr(0, split)), imag_part(s.substr(split)));
}

CircleHomeo parse_boundary(std::string_view text) {
  std::optional<CircleHomeo> acc;
  while (true) {
    const auto gt = text.find('>');
    CircleHomeo stage = parse_stage(text.substr(0, gt));
    acc = acc ? CircleHomeo::then(*acc, stage) : stage;
    if (gt == std::string_view::npos) break;
    text = text.substr(gt + 1);
  }
  return *acc;
}

std::vector<Complex> trace_on_mesh(const CircleHomeo& h0, const DiskMesh& mesh) {
  std::vector<Complex> out;
  out.reserve(mesh.boundary_ids().size());
  for (int b : mesh.boundary_ids()) out.push_back(h0.trace(std::arg(mesh.vertices()[b])));
  return out;
}

DiscreteMap with_trace(const CircleHomeo& h0, const DiskMesh& mesh, DiscreteMap map) {
  require_on_mesh(mesh, map);
  const auto values = trace_on_mesh(h0, mesh);
  const auto ids = mesh.boundary_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) map.values[ids[i]] = values[i];
  return map;
}

}  // namespace conformal_lab
