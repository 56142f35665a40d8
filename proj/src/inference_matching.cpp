#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <numeric>

#include "lightleak/error.hpp"
#include "lightleak/inference.hpp"

namespace lightleak::inference {
namespace {

// Row-by-row DTW over an n x m grid; cost(i, j) gives the pointwise cost.
// Rows are stored shifted by one column so column -1 is an infinite sentinel.
template <typename Cost>
double dtw_grid(std::size_t n, std::size_t m, Cost cost, const DtwOptions& opts, const double* suffix_lb = nullptr) {
  long band = opts.band;
  if (band >= 0) {
    band = std::max<long>(band, std::labs(static_cast<long>(n) - static_cast<long>(m)));
  }
  thread_local std::vector<double> prev_buf, cur_buf;
  prev_buf.assign(m + 2, kInf);
  cur_buf.assign(m + 2, kInf);
  double* prev = prev_buf.data();
  double* cur = cur_buf.data();

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = 0, hi = m - 1;
    if (band >= 0) {
      lo = static_cast<std::size_t>(std::max<long>(0, static_cast<long>(i) - band));
      hi = static_cast<std::size_t>(std::min<long>(static_cast<long>(m) - 1, static_cast<long>(i) + band));
    }
    cur[lo] = kInf;  // column lo - 1
    double row_min = kInf;
    std::size_t j = lo;
    if (i == 0) {
      cur[1] = cost(0, 0);
      row_min = cur[1];
      j = 1;
    }
    for (; j <= hi; ++j) {
      const double best = std::min(std::min(prev[j], prev[j + 1]), cur[j]);
      const double v = best + cost(i, j);
      cur[j + 1] = v;
      row_min = std::min(row_min, v);
    }
    if (hi + 2 <= m) cur[hi + 2] = kInf;  // column hi + 1
    // columns past hi are still unmatched and cost at least suffix_lb[hi + 1]
    const double rest = suffix_lb ? suffix_lb[hi + 1] : 0.0;
    if (row_min + rest > opts.cutoff) return kInf;
    std::swap(prev, cur);
  }
  return prev[m] > opts.cutoff ? kInf : prev[m];
}

double sq(double x) { return x * x; }

double point_cost(const double* a, const double* b, int dims) {
  double c = sq(a[0] - b[0]);
  for (int k = 1; k < dims; ++k) c += sq(a[k] - b[k]);
  return c;
}

void require_non_empty(std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw Error(Errc::empty_input, "matcher input is empty");
}

template <typename Cost>
double osb_grid(std::size_t n, std::size_t m, Cost cost, double penalty, long band, double cutoff = kInf) {
  if (!(penalty >= 0)) throw Error(Errc::invalid_argument, "skip penalty must be >= 0");
  if (band >= 0) band = std::max<long>(band, std::labs(static_cast<long>(n) - static_cast<long>(m)));
  auto inside = [&](std::size_t i, std::size_t j) {
    return band < 0 || std::labs(static_cast<long>(i) - static_cast<long>(j)) <= band;
  };
  // F(i, j): best cost for the first i query elements using the first j
  // target elements.
  thread_local std::vector<double> prev_buf, cur_buf;
  prev_buf.assign(m + 1, kInf);
  cur_buf.assign(m + 1, kInf);
  double* prev = prev_buf.data();
  double* cur = cur_buf.data();
  for (std::size_t j = 0; j <= m; ++j) prev[j] = inside(0, j) ? 0.0 : kInf;
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t lo = 1, hi = m;
    if (band >= 0) {
      lo = static_cast<std::size_t>(std::max<long>(1, static_cast<long>(i) - band));
      hi = static_cast<std::size_t>(std::min<long>(static_cast<long>(m), static_cast<long>(i) + band));
    }
    cur[0] = inside(i, 0) ? prev[0] + penalty : kInf;
    if (lo > 1) cur[lo - 1] = kInf;
    double row_min = cur[0];
    for (std::size_t j = lo; j <= hi; ++j) {
      double best = prev[j - 1] + cost(i - 1, j - 1);
      best = std::min(best, prev[j] + penalty);
      best = std::min(best, cur[j - 1]);
      cur[j] = best;
      row_min = std::min(row_min, best);
    }
    if (hi < m) cur[hi + 1] = kInf;
    // every later row only adds non-negative costs
    if (row_min > cutoff) return kInf;
    std::swap(prev, cur);
  }
  return prev[m] > cutoff ? kInf : prev[m];
}

// Running min/max of x over [i - r, i + r], one channel of a row-major
// sequence with d channels.
void running_envelope(const double* x, std::size_t n, int d, int c, long r, double scale,
                      double* upper, double* lower) {
  std::deque<std::size_t> maxq, minq;
  auto val = [&](std::size_t k) { return x[k * d + c] * scale; };
  std::size_t pushed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const std::size_t want = std::min(n, i + static_cast<std::size_t>(r) + 1); pushed < want; ++pushed) {
      while (!maxq.empty() && val(maxq.back()) <= val(pushed)) maxq.pop_back();
      maxq.push_back(pushed);
      while (!minq.empty() && val(minq.back()) >= val(pushed)) minq.pop_back();
      minq.push_back(pushed);
    }
    const std::size_t first = i > static_cast<std::size_t>(r) ? i - r : 0;
    while (maxq.front() < first) maxq.pop_front();
    while (minq.front() < first) minq.pop_front();
    upper[i] = val(maxq.front());
    lower[i] = val(minq.front());
  }
}

// Each query element is either skipped or matched within the band, so it
// costs at least min(penalty, distance to the target's running envelope).
double lb_osb(const Series& q, const double* seg, double scale, long band, double penalty) {
  const std::size_t n = q.length();
  const int d = q.dims;
  thread_local std::vector<double> up, lo, acc;
  up.resize(n);
  lo.resize(n);
  acc.assign(n, 0.0);
  for (int c = 0; c < d; ++c) {
    running_envelope(seg, n, d, c, band, scale, up.data(), lo.data());
    for (std::size_t i = 0; i < n; ++i) {
      const double v = q.values[i * d + c];
      if (v > up[i]) {
        acc[i] += sq(v - up[i]);
      } else if (v < lo[i]) {
        acc[i] += sq(lo[i] - v);
      }
    }
  }
  double lb = 0.0;
  for (double a : acc) lb += std::min(penalty, a);
  return lb;
}

// Upper/lower running envelopes of a query, per channel, radius r.
struct Envelope {
  std::vector<double> upper, lower;
};

Envelope query_envelope(const Series& q, long r) {
  const std::size_t n = q.length();
  const int d = q.dims;
  Envelope e{std::vector<double>(q.values.size()), std::vector<double>(q.values.size())};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > static_cast<std::size_t>(r) ? i - r : 0;
    const std::size_t hi = std::min(n - 1, i + r);
    for (int c = 0; c < d; ++c) {
      double u = -kInf, l = kInf;
      for (std::size_t k = lo; k <= hi; ++k) {
        u = std::max(u, q.values[k * d + c]);
        l = std::min(l, q.values[k * d + c]);
      }
      e.upper[i * d + c] = u;
      e.lower[i * d + c] = l;
    }
  }
  return e;
}

// With `suffix` (length count / dims + 1), also fills suffix[i] with the
// bound contributed by time steps i and later.
double lb_keogh(const Envelope& env, const double* seg, std::size_t count, double scale, int dims = 1,
                double* suffix = nullptr) {
  double lb = 0.0;
  const std::size_t steps = count / dims;
  if (suffix) suffix[steps] = 0.0;
  for (std::size_t t = steps; t-- > 0;) {
    for (int c = 0; c < dims; ++c) {
      const std::size_t k = t * dims + c;
      const double v = seg[k] * scale;
      if (v > env.upper[k]) {
        lb += sq(v - env.upper[k]);
      } else if (v < env.lower[k]) {
        lb += sq(env.lower[k] - v);
      }
    }
    if (suffix) suffix[t] = lb;
  }
  return lb;
}

double mean_square(const double* v, std::size_t count, int dims) {
  if (count == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < count; ++k) acc += sq(v[k]);
  return acc / static_cast<double>(count / dims);
}

}  // namespace

double dtw(std::span<const double> a, std::span<const double> b, const DtwOptions& opts) {
  require_non_empty(a.size(), b.size());
  return dtw_grid(a.size(), b.size(), [&](std::size_t i, std::size_t j) { return sq(a[i] - b[j]); }, opts);
}

double mdtw(std::span<const std::array<double, 3>> a, std::span<const std::array<double, 3>> b,
            const DtwOptions& opts) {
  require_non_empty(a.size(), b.size());
  return dtw_grid(
      a.size(), b.size(),
      [&](std::size_t i, std::size_t j) { return point_cost(a[i].data(), b[j].data(), 3); }, opts);
}

double dtw_series(const Series& a, const Series& b, const DtwOptions& opts) {
  if (a.dims != b.dims) throw Error(Errc::kind_mismatch, "series dimensions differ");
  require_non_empty(a.length(), b.length());
  const int d = a.dims;
  return dtw_grid(
      a.length(), b.length(),
      [&](std::size_t i, std::size_t j) { return point_cost(&a.values[i * d], &b.values[j * d], d); },
      opts);
}

double osb(std::span<const double> query, std::span<const double> target, double skip_penalty,
           long band) {
  require_non_empty(query.size(), target.size());
  return osb_grid(
      query.size(), target.size(),
      [&](std::size_t i, std::size_t j) { return sq(query[i] - target[j]); }, skip_penalty, band);
}

double osb_series(const Series& query, const Series& target, double skip_penalty, long band) {
  if (query.dims != target.dims) throw Error(Errc::kind_mismatch, "series dimensions differ");
  require_non_empty(query.length(), target.length());
  const int d = query.dims;
  return osb_grid(
      query.length(), target.length(),
      [&](std::size_t i, std::size_t j) {
        return point_cost(&query.values[i * d], &target.values[j * d], d);
      },
      skip_penalty, band);
}

const char* to_string(Matcher m) {
  switch (m) {
    case Matcher::dtw: return "dtw";
    case Matcher::osb: return "osb";
    case Matcher::mdtw: return "mdtw";
  }
  return "dtw";
}

Matcher matcher_from_string(const std::string& s) {
  if (s == "dtw") return Matcher::dtw;
  if (s == "osb") return Matcher::osb;
  if (s == "mdtw") return Matcher::mdtw;
  throw Error(Errc::invalid_argument, "unknown matcher '" + s + "'");
}

namespace {

constexpr std::size_t kLanes = 8;

// kLanes independent square-window DTWs of a scalar query against
// lane-interleaved targets (targets[j * kLanes + l]); suffix holds each lane's
// LB_Keogh tail sums the same way. Lanes exceeding the cutoff come back as
// infinity.
std::array<double, kLanes> dtw_lanes(const double* q, std::size_t n, const double* targets, const double* suffix,
                                     long band, double cutoff) {
  constexpr std::size_t L = kLanes;
  const std::size_t m = n;
  thread_local std::vector<double> prev_buf, cur_buf;
  prev_buf.assign((m + 2) * L, kInf);
  cur_buf.assign((m + 2) * L, kInf);
  double* prev = prev_buf.data();
  double* cur = cur_buf.data();
  std::array<bool, L> dead{};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = 0, hi = m - 1;
    if (band >= 0) {
      lo = static_cast<std::size_t>(std::max<long>(0, static_cast<long>(i) - band));
      hi = std::min(m - 1, i + static_cast<std::size_t>(band));
    }
    for (std::size_t l = 0; l < L; ++l) cur[lo * L + l] = kInf;
    double row_min[L];
    for (std::size_t l = 0; l < L; ++l) row_min[l] = kInf;
    const double qi = q[i];
    std::size_t j = lo;
    if (i == 0) {
      for (std::size_t l = 0; l < L; ++l) {
        const double v = sq(qi - targets[l]);
        cur[L + l] = v;
        row_min[l] = v;
      }
      j = 1;
    }
    for (; j <= hi; ++j) {
      const double* pd = prev + j * L;
      const double* pu = prev + (j + 1) * L;
      const double* cl = cur + j * L;
      double* out = cur + (j + 1) * L;
      const double* tj = targets + j * L;
      for (std::size_t l = 0; l < L; ++l) {
        const double best = std::min(std::min(pd[l], pu[l]), cl[l]);
        const double v = best + sq(qi - tj[l]);
        out[l] = v;
        row_min[l] = std::min(row_min[l], v);
      }
    }
    if (hi + 2 <= m) {
      for (std::size_t l = 0; l < L; ++l) cur[(hi + 2) * L + l] = kInf;
    }
    bool all_dead = true;
    for (std::size_t l = 0; l < L; ++l) {
      dead[l] = dead[l] || row_min[l] + suffix[(hi + 1) * L + l] > cutoff;
      all_dead = all_dead && dead[l];
    }
    if (all_dead) break;
    std::swap(prev, cur);
  }
  std::array<double, L> result;
  for (std::size_t l = 0; l < L; ++l) result[l] = dead[l] || prev[m * L + l] > cutoff ? kInf : prev[m * L + l];
  return result;
}

double score_template(const Series& query, const Envelope* env, const Template& t,
                      const MatchOptions& opt, long band) {
  const std::size_t n = query.length();
  const std::size_t m = t.series.length();
  const int d = query.dims;
  const bool is_osb = opt.matcher == Matcher::osb;

  auto penalty_for = [&](const double* v, std::size_t count, double scale) {
    return opt.osb_penalty.value_or(mean_square(v, count, d) * scale * scale);
  };
  auto compare = [&](const Series& target, double penalty, double cutoff) {
    if (is_osb) {
      require_non_empty(n, target.length());
      return osb_grid(
          n, target.length(),
          [&](std::size_t i, std::size_t j) { return point_cost(&query.values[i * d], &target.values[j * d], d); },
          penalty, band, cutoff);
    }
    return dtw_series(query, target, {band, cutoff});
  };
  auto compare_bounded = [&](const Series& target, double cutoff, const double* suffix) {
    if (d == 1) {
      const double* q = query.values.data();
      const double* w = target.values.data();
      return dtw_grid(
          n, target.length(), [&](std::size_t i, std::size_t j) { return sq(q[i] - w[j]); }, DtwOptions{band, cutoff},
          suffix);
    }
    return dtw_grid(
        n, target.length(),
        [&](std::size_t i, std::size_t j) { return point_cost(&query.values[i * d], &target.values[j * d], d); },
        DtwOptions{band, cutoff}, suffix);
  };

  if (opt.alignment == Alignment::whole || m <= n) {
    return compare(t.series, is_osb ? penalty_for(t.series.values.data(), t.series.values.size(), 1.0) : 0.0,
                   kInf);
  }

  const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(opt.stride_s * t.rate_hz)));
  std::vector<std::size_t> offsets;
  for (std::size_t o = 0; o + n <= m; o += stride) offsets.push_back(o);
  if (offsets.back() != m - n) offsets.push_back(m - n);

  // Window scale factors, then lower bounds to visit the most promising
  // windows first and skip the rest once they cannot win.
  struct Candidate {
    std::size_t offset;
    double scale;
    double penalty;
    double bound;
  };
  std::vector<Candidate> cands;
  cands.reserve(offsets.size());
  const long radius = band >= 0 ? band : static_cast<long>(n);
  for (std::size_t o : offsets) {
    const double* seg = &t.series.values[o * d];
    double scale = 1.0;
    if (opt.renormalize_windows) {
      double top = 0.0;
      for (std::size_t k = 0; k < n * d; ++k) top = std::max(top, seg[k]);
      if (!(top > 0.0)) continue;
      scale = 1.0 / top;
    }
    Candidate c{o, scale, 0.0, 0.0};
    if (is_osb) {
      c.penalty = penalty_for(seg, n * d, scale);
      c.bound = lb_osb(query, seg, scale, radius, c.penalty);
    } else if (env) {
      c.bound = lb_keogh(*env, seg, n * d, scale, d);
    }
    cands.push_back(c);
  }
  if (cands.empty()) return kInf;
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.bound < b.bound; });

  double best = kInf;
  Series window;
  window.dims = d;
  auto load_window = [&](const Candidate& c) {
    window.values.assign(t.series.values.begin() + static_cast<std::ptrdiff_t>(c.offset * d),
                         t.series.values.begin() + static_cast<std::ptrdiff_t>((c.offset + n) * d));
    if (c.scale != 1.0) {
      for (double& v : window.values) v *= c.scale;
    }
  };

  if (!is_osb && env && d == 1) {
    // First window alone to get a cutoff, the rest in interleaved batches.
    std::size_t k = 0;
    load_window(cands[0]);
    {
      thread_local std::vector<double> suffix;
      suffix.resize(n + 1);
      lb_keogh(*env, window.values.data(), n, 1.0, 1, suffix.data());
      best = compare_bounded(window, kInf, suffix.data());
      k = 1;
    }
    thread_local std::vector<double> lanes, suffixes;
    while (k < cands.size() && cands[k].bound < best) {
      std::size_t count = 0;
      lanes.assign(n * kLanes, 0.0);
      suffixes.assign((n + 1) * kLanes, 0.0);
      thread_local std::vector<double> sfx;
      sfx.resize(n + 1);
      for (; count < kLanes && k < cands.size() && cands[k].bound < best; ++count, ++k) {
        load_window(cands[k]);
        lb_keogh(*env, window.values.data(), n, 1.0, 1, sfx.data());
        for (std::size_t j = 0; j < n; ++j) lanes[j * kLanes + count] = window.values[j];
        for (std::size_t j = 0; j <= n; ++j) suffixes[j * kLanes + count] = sfx[j];
      }
      // pad unused lanes with a copy of lane 0
      for (std::size_t l = count; l < kLanes; ++l) {
        for (std::size_t j = 0; j < n; ++j) lanes[j * kLanes + l] = lanes[j * kLanes];
        for (std::size_t j = 0; j <= n; ++j) suffixes[j * kLanes + l] = suffixes[j * kLanes];
      }
      const auto out = dtw_lanes(query.values.data(), n, lanes.data(), suffixes.data(), band, best);
      for (std::size_t l = 0; l < count; ++l) best = std::min(best, out[l]);
    }
    return best;
  }

  for (const auto& c : cands) {
    if (c.bound >= best) break;
    load_window(c);
    if (!is_osb && env) {
      thread_local std::vector<double> suffix;
      suffix.resize(n + 1);
      lb_keogh(*env, window.values.data(), n * d, 1.0, d, suffix.data());
      best = std::min(best, compare_bounded(window, best, suffix.data()));
    } else {
      best = std::min(best, compare(window, c.penalty, best));
    }
  }
  return best;
}

}  // namespace

MatchResult match_profile(const Series& query, const ReferenceLibrary& library, MediaKind kind,
                          const MatchOptions& options, const std::optional<std::string>& truth_id) {
  if (library.empty()) throw Error(Errc::empty_library, "no templates to match");
  if (query.length() == 0) throw Error(Errc::empty_input, "empty query");
  const int want_dims = kind == MediaKind::audio ? 1 : 3;
  if (query.dims != want_dims) {
    throw Error(Errc::kind_mismatch, std::string("query dimensions do not fit ") + to_string(kind));
  }
  if ((options.matcher == Matcher::mdtw) != (kind == MediaKind::video)) {
    throw Error(Errc::kind_mismatch, std::string(to_string(options.matcher)) +
                                         " cannot score " + to_string(kind) + " queries");
  }

  const std::size_t n = query.length();
  const long band = options.band_fraction > 0
                        ? static_cast<long>(std::ceil(options.band_fraction * static_cast<double>(n)))
                        : -1;
  std::optional<Envelope> env;
  if (band >= 0 && options.alignment == Alignment::sliding) env = query_envelope(query, band);

  MatchResult result;
  result.truth_id = truth_id;
  bool any = false;
  for (const Template* t : library.templates()) {
    if (t->kind != kind) continue;
    any = true;
    double dist = kInf;
    if (t->usable && t->series.length() > 0) {
      dist = score_template(query, env ? &*env : nullptr, *t, options, band);
    }
    result.ranked.push_back({t->id, dist});
  }
  if (!any) throw Error(Errc::empty_library, std::string("no ") + to_string(kind) + " templates");

  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const MatchEntry& a, const MatchEntry& b) {
                     if (a.distance != b.distance) return a.distance < b.distance;
                     return a.id < b.id;
                   });
  if (truth_id) {
    for (std::size_t i = 0; i < result.ranked.size(); ++i) {
      if (result.ranked[i].id == *truth_id) {
        result.rank_of_truth = i + 1;
        break;
      }
    }
  }
  return result;
}

void write_match_csv(const MatchResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "rank,id,distance\n";
  char buf[64];
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g", result.ranked[i].distance);
    out << (i + 1) << ',' << result.ranked[i].id << ',' << buf << '\n';
  }
}

int genre_index(const std::string& genre) {
  for (std::size_t i = 0; i < kGenres.size(); ++i) {
    if (genre == kGenres[i]) return static_cast<int>(i);
  }
  return -1;
}

GenreMatrix genre_confusion(std::span<const MatchResult> results, const ReferenceLibrary& library) {
  GenreMatrix m{};
  for (const auto& r : results) {
    if (!r.truth_id || r.ranked.empty()) {
      throw Error(Errc::missing_genre, "result without ground truth");
    }
    const Template* truth = library.find(*r.truth_id);
    const Template* pred = library.find(r.ranked.front().id);
    const int row = truth ? genre_index(truth->info.genre) : -1;
    const int col = pred ? genre_index(pred->info.genre) : -1;
    if (row < 0 || col < 0) {
      throw Error(Errc::missing_genre, "'" + *r.truth_id + "' or its prediction has no genre");
    }
    ++m[row][col];
  }
  return m;
}

}  // namespace lightleak::inference
