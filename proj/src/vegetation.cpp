#include "simgen/vegetation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace simgen::vegetation {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(Errc::Parse, "line " + std::to_string(line) + ": " + msg);
}

double parse_number(std::string_view s, std::size_t line, const char* what) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    fail(line, std::string("invalid number for ") + what);
  return v;
}

bool is_symbol(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '+' || c == '-' || c == '[' || c == ']';
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct PendingRule {
  std::size_t line;
  bool explicit_weight;
  double weight;
  std::string symbols;
};

}  // namespace

LSystem parse_lsystem(std::string_view text) {
  LSystem ls;
  bool have_axiom = false;
  std::map<char, std::vector<PendingRule>> pending;
  std::size_t line_no = 0;

  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    // Header lines: lowercase key followed by a colon.
    std::size_t key_end = 0;
    while (key_end < line.size() && ((line[key_end] >= 'a' && line[key_end] <= 'z') || line[key_end] == '_'))
      ++key_end;
    if (key_end > 1 && key_end < line.size() && trim(line.substr(key_end)).front() == ':') {
      const std::string_view key = line.substr(0, key_end);
      std::string_view value = trim(line.substr(key_end));
      value = trim(value.substr(1));
      if (key == "axiom") {
        for (char c : value)
          if (!is_symbol(c)) fail(line_no, std::string("invalid axiom symbol '") + c + "'");
        ls.axiom = std::string(value);
        have_axiom = true;
      } else if (key == "angle") {
        ls.angle = parse_number(value, line_no, "angle");
      } else if (key == "step") {
        ls.step = parse_number(value, line_no, "step");
        if (!(ls.step > 0.0)) fail(line_no, "step must be > 0");
      } else if (key == "step_decay") {
        ls.step_decay = parse_number(value, line_no, "step_decay");
        if (!(ls.step_decay > 0.0 && ls.step_decay <= 1.0)) fail(line_no, "step_decay must be in (0,1]");
      } else if (key == "width") {
        ls.width = parse_number(value, line_no, "width");
        if (!(ls.width > 0.0)) fail(line_no, "width must be > 0");
      } else if (key == "width_decay") {
        ls.width_decay = parse_number(value, line_no, "width_decay");
        if (!(ls.width_decay > 0.0 && ls.width_decay <= 1.0)) fail(line_no, "width_decay must be in (0,1]");
      } else {
        fail(line_no, "unknown header '" + std::string(key) + "'");
      }
      continue;
    }

    // Rule lines: <symbol> -> <production> | <symbol> -(p)-> <production>
    const auto arrow = line.find("->");
    if (arrow == std::string_view::npos) fail(line_no, "malformed arrow (expected '->' or '-(p)->')");
    std::string_view head;
    bool explicit_weight = false;
    double weight = 0.0;
    if (arrow > 0 && line[arrow - 1] == ')') {
      const auto open = line.rfind("-(", arrow);
      if (open == std::string_view::npos) fail(line_no, "malformed arrow (unmatched ')')");
      head = trim(line.substr(0, open));
      weight = parse_number(line.substr(open + 2, arrow - 1 - (open + 2)), line_no, "probability");
      if (!(weight > 0.0)) fail(line_no, "probability must be positive");
      explicit_weight = true;
    } else {
      head = trim(line.substr(0, arrow));
    }
    if (head.size() != 1) fail(line_no, "rule head must be a single symbol");
    if (!is_symbol(head.front())) fail(line_no, std::string("invalid head symbol '") + head.front() + "'");
    const std::string_view body = trim(line.substr(arrow + 2));
    for (char c : body)
      if (!is_symbol(c)) fail(line_no, std::string("invalid production symbol '") + c + "'");

    auto& alts = pending[head.front()];
    alts.push_back({line_no, explicit_weight, weight, std::string(body)});
    double explicit_sum = 0.0;
    for (const auto& r : alts)
      if (r.explicit_weight) explicit_sum += r.weight;
    if (explicit_sum > 1.0 + 1e-9) fail(line_no, "probabilities for '" + std::string(head) + "' sum above 1");
  }

  if (!have_axiom) fail(line_no, "missing axiom");

  for (auto& [symbol, alts] : pending) {
    double explicit_sum = 0.0;
    std::size_t implicit = 0;
    for (const auto& r : alts) {
      if (r.explicit_weight)
        explicit_sum += r.weight;
      else
        ++implicit;
    }
    const double share = implicit > 0 ? (explicit_sum > 0.0 ? (1.0 - explicit_sum) : 1.0) / static_cast<double>(implicit)
                                      : 0.0;
    auto& out = ls.rules[symbol];
    for (const auto& r : alts) {
      const double w = r.explicit_weight ? r.weight : share;
      if (!(w > 1e-12)) fail(r.line, "no probability mass left for this alternative");
      out.push_back({w, r.symbols});
    }
  }
  return ls;
}

std::string format_lsystem(const LSystem& ls) {
  std::ostringstream out;
  out << "axiom: " << ls.axiom << "\n";
  out << "angle: " << fmt_double(ls.angle) << "\n";
  out << "step: " << fmt_double(ls.step) << "\n";
  out << "step_decay: " << fmt_double(ls.step_decay) << "\n";
  out << "width: " << fmt_double(ls.width) << "\n";
  out << "width_decay: " << fmt_double(ls.width_decay) << "\n";
  for (const auto& [symbol, alts] : ls.rules)
    for (const auto& alt : alts) out << symbol << " -(" << fmt_double(alt.weight) << ")-> " << alt.symbols << "\n";
  return out.str();
}

std::string expand(const LSystem& ls, int generations, Rng& rng, std::size_t cap) {
  if (generations < 0) throw Error(Errc::BadParams, "generations must be >= 0");
  std::string current = ls.axiom;
  if (current.size() > cap) throw Error(Errc::ExpansionTooLarge, "axiom exceeds expansion cap");
  for (int g = 0; g < generations; ++g) {
    std::string next;
    next.reserve(current.size() * 2);
    for (char c : current) {
      const auto it = ls.rules.find(c);
      if (it == ls.rules.end() || it->second.empty()) {
        next.push_back(c);
      } else if (it->second.size() == 1) {
        next += it->second.front().symbols;
      } else {
        double total = 0.0;
        for (const auto& alt : it->second) total += alt.weight;
        const double u = rng.unit() * total;
        double acc = 0.0;
        const Production* chosen = &it->second.back();
        for (const auto& alt : it->second) {
          acc += alt.weight;
          if (u < acc) {
            chosen = &alt;
            break;
          }
        }
        next += chosen->symbols;
      }
      if (next.size() > cap)
        throw Error(Errc::ExpansionTooLarge, "expansion exceeded " + std::to_string(cap) + " symbols");
    }
    current = std::move(next);
  }
  return current;
}

TurtleOutput turtle_render(std::string_view symbols, const LSystem& ls, double origin_x, double origin_y,
                           double heading) {
  struct TurtleState {
    double x, y, heading;
    int depth;
  };
  const double turn = ls.angle * std::numbers::pi / 180.0;
  TurtleState s{origin_x, origin_y, heading, 0};
  std::vector<TurtleState> stack;
  TurtleOutput out;

  for (char c : symbols) {
    switch (c) {
      case 'F':
      case 'f': {
        const double len = ls.step * std::pow(ls.step_decay, s.depth);
        const double nx = s.x + len * std::cos(s.heading);
        const double ny = s.y + len * std::sin(s.heading);
        if (c == 'F') out.segments.push_back({s.x, s.y, nx, ny, ls.width * std::pow(ls.width_decay, s.depth), s.depth});
        s.x = nx;
        s.y = ny;
        break;
      }
      case '+': s.heading -= turn; break;
      case '-': s.heading += turn; break;
      case '[':
        stack.push_back(s);
        ++s.depth;
        break;
      case ']':
        if (stack.empty()) throw Error(Errc::UnbalancedBrackets, "']' without matching '['");
        s = stack.back();
        stack.pop_back();
        break;
      case 'L': {
        const double len = ls.step * std::pow(ls.step_decay, s.depth);
        out.leaves.push_back({s.x, s.y, 0.5 * len, 0.25 * len, s.heading, s.depth});
        break;
      }
      default: break;
    }
  }
  if (!stack.empty()) throw Error(Errc::UnbalancedBrackets, "unclosed '['");
  return out;
}

namespace {

double segment_distance(double px, double py, double x0, double y0, double x1, double y1) {
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double qx = x0 + t * dx - px;
  const double qy = y0 + t * dy - py;
  return std::sqrt(qx * qx + qy * qy);
}

}  // namespace

RasterImage rasterize_tree(const TurtleOutput& t, std::size_t width, std::size_t height, const TreeStyle& style) {
  if (t.segments.empty() && t.leaves.empty()) throw Error(Errc::EmptyOutput, "nothing to draw");

  double minx = std::numeric_limits<double>::infinity();
  double miny = minx;
  double maxx = -minx;
  double maxy = -minx;
  auto grow = [&](double x, double y) {
    minx = std::min(minx, x);
    maxx = std::max(maxx, x);
    miny = std::min(miny, y);
    maxy = std::max(maxy, y);
  };
  for (const auto& s : t.segments) {
    grow(s.x0, s.y0);
    grow(s.x1, s.y1);
  }
  for (const auto& l : t.leaves) {
    const double r = std::max(l.rx, l.ry);
    grow(l.cx - r, l.cy - r);
    grow(l.cx + r, l.cy + r);
  }

  const double avail_w = 0.9 * static_cast<double>(width);
  const double avail_h = 0.9 * static_cast<double>(height);
  const double bw = maxx - minx;
  const double bh = maxy - miny;
  double scale = std::numeric_limits<double>::infinity();
  if (bw > 0.0) scale = std::min(scale, avail_w / bw);
  if (bh > 0.0) scale = std::min(scale, avail_h / bh);
  if (!std::isfinite(scale)) scale = 1.0;
  const double cx = 0.5 * (minx + maxx);
  const double cy = 0.5 * (miny + maxy);
  const double ox = 0.5 * static_cast<double>(width);
  const double oy = 0.5 * static_cast<double>(height);
  auto map_x = [&](double x) { return (x - cx) * scale + ox; };
  auto map_y = [&](double y) { return (y - cy) * scale + oy; };

  RasterImage img(width, height, style.background);
  const auto W = static_cast<long>(width);
  const auto H = static_cast<long>(height);

  for (const auto& s : t.segments) {
    const double x0 = map_x(s.x0), y0 = map_y(s.y0), x1 = map_x(s.x1), y1 = map_y(s.y1);
    const double half = std::max(0.5 * s.width, 0.5);
    const long lx = std::max(0L, static_cast<long>(std::floor(std::min(x0, x1) - half - 1)));
    const long hx = std::min(W - 1, static_cast<long>(std::ceil(std::max(x0, x1) + half + 1)));
    const long ly = std::max(0L, static_cast<long>(std::floor(std::min(y0, y1) - half - 1)));
    const long hy = std::min(H - 1, static_cast<long>(std::ceil(std::max(y0, y1) + half + 1)));
    for (long y = ly; y <= hy; ++y)
      for (long x = lx; x <= hx; ++x)
        if (segment_distance(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, x0, y0, x1, y1) <= half)
          img.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), style.bark);
  }

  for (const auto& l : t.leaves) {
    const double cxp = map_x(l.cx), cyp = map_y(l.cy);
    const double rx = std::max(l.rx * scale, 0.5);
    const double ry = std::max(l.ry * scale, 0.5);
    const double c = std::cos(l.rotation);
    const double s = std::sin(l.rotation);
    const double reach = std::max(rx, ry) + 1.0;
    bool any = false;
    for (long y = std::max(0L, static_cast<long>(cyp - reach)); y <= std::min(H - 1, static_cast<long>(cyp + reach)); ++y)
      for (long x = std::max(0L, static_cast<long>(cxp - reach)); x <= std::min(W - 1, static_cast<long>(cxp + reach));
           ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cxp;
        const double dy = static_cast<double>(y) + 0.5 - cyp;
        const double u = c * dx + s * dy;
        const double v = -s * dx + c * dy;
        if ((u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0) {
          img.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), style.leaf);
          any = true;
        }
      }
    if (!any && cxp >= 0.0 && cyp >= 0.0 && cxp < static_cast<double>(width) && cyp < static_cast<double>(height))
      img.set(static_cast<std::size_t>(cxp), static_cast<std::size_t>(cyp), style.leaf);
  }
  return img;
}

void validate(const GrayScottParams& p) {
  if (!(p.du >= 0.0) || !(p.dv >= 0.0)) throw Error(Errc::BadParams, "diffusion rates must be >= 0");
  if (!(p.dt > 0.0)) throw Error(Errc::BadParams, "dt must be > 0");
  if (p.steps < 0) throw Error(Errc::BadParams, "steps must be >= 0");
  if (p.dt * std::max(p.du, p.dv) > 0.25) throw Error(Errc::Unstable, "dt*max(Du,Dv) must be <= 0.25");
}

GrayScottState gray_scott(const Grid2D& u0, const Grid2D& v0, const GrayScottParams& p) {
  if (!u0.same_shape(v0)) throw Error(Errc::ShapeMismatch, "u and v must share dimensions");
  validate(p);
  const std::size_t w = u0.width();
  const std::size_t h = u0.height();
  std::vector<double> u(u0.values().begin(), u0.values().end());
  std::vector<double> v(v0.values().begin(), v0.values().end());
  std::vector<double> un(u.size());
  std::vector<double> vn(v.size());

  for (int step = 0; step < p.steps; ++step) {
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t up = (y + h - 1) % h;
      const std::size_t dn = (y + 1) % h;
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t lf = (x + w - 1) % w;
        const std::size_t rt = (x + 1) % w;
        const std::size_t i = y * w + x;
        const double uc = u[i];
        const double vc = v[i];
        const double lap_u = u[y * w + lf] + u[y * w + rt] + u[up * w + x] + u[dn * w + x] - 4.0 * uc;
        const double lap_v = v[y * w + lf] + v[y * w + rt] + v[up * w + x] + v[dn * w + x] - 4.0 * vc;
        const double uvv = uc * vc * vc;
        un[i] = std::clamp(uc + p.dt * (p.du * lap_u - uvv + p.feed * (1.0 - uc)), 0.0, 2.0);
        vn[i] = std::clamp(vc + p.dt * (p.dv * lap_v + uvv - (p.feed + p.kill) * vc), 0.0, 2.0);
      }
    }
    u.swap(un);
    v.swap(vn);
  }
  return {Grid2D(w, h, std::move(u)), Grid2D(w, h, std::move(v))};
}

GrayScottState gray_scott_seeded(std::size_t width, std::size_t height, std::size_t seeds, std::size_t seed_size,
                                 Rng& rng) {
  Grid2D u(width, height, 1.0);
  Grid2D v(width, height, 0.0);
  for (std::size_t k = 0; k < seeds; ++k) {
    const auto x0 = static_cast<std::size_t>(rng.below(width));
    const auto y0 = static_cast<std::size_t>(rng.below(height));
    for (std::size_t dy = 0; dy < seed_size; ++dy)
      for (std::size_t dx = 0; dx < seed_size; ++dx) {
        const std::size_t x = (x0 + dx) % width;
        const std::size_t y = (y0 + dy) % height;
        u.at(x, y) = 0.5;
        v.at(x, y) = 0.25;
      }
  }
  return {std::move(u), std::move(v)};
}

}  // namespace simgen::vegetation
