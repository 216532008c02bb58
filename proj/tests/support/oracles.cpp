#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace circa::oracle {

double quantile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = lo + 1 < xs.size() ? lo + 1 : lo;
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double medcouple(const std::vector<double>& xs) {
    std::vector<double> z = xs;
    std::sort(z.begin(), z.end(), std::greater<double>());
    const std::size_t n = z.size();
    const double med = n % 2 ? z[n / 2] : (z[n / 2 - 1] + z[n / 2]) / 2.0;
    std::vector<double> plus;
    std::vector<double> minus;
    for (double v : z) {
        if (v >= med) plus.push_back(v);
        if (v <= med) minus.push_back(v);
    }
    std::vector<double> kernel;
    const long long p = static_cast<long long>(plus.size());
    for (long long i = 0; i < p; ++i) {
        for (long long j = 0; j < static_cast<long long>(minus.size()); ++j) {
            const double xj = plus[static_cast<std::size_t>(i)];
            const double xi = minus[static_cast<std::size_t>(j)];
            if (xj == xi) {
                const long long s = p - 1 - i - j;
                kernel.push_back(s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0));
            } else {
                kernel.push_back(((xj - med) - (med - xi)) / (xj - xi));
            }
        }
    }
    std::sort(kernel.begin(), kernel.end());
    const std::size_t m = kernel.size();
    return m % 2 ? kernel[m / 2] : (kernel[m / 2 - 1] + kernel[m / 2]) / 2.0;
}

KwResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const double n = static_cast<double>(pooled.size());
    // Average rank of a value = (#smaller) + (#equal + 1) / 2.
    auto rank_of = [&](double v) {
        double smaller = 0.0;
        double equal = 0.0;
        for (double u : pooled) {
            if (u < v) smaller += 1.0;
            if (u == v) equal += 1.0;
        }
        return smaller + (equal + 1.0) / 2.0;
    };
    double sum = 0.0;
    for (const auto& g : groups) {
        if (g.empty()) continue;
        double r = 0.0;
        for (double v : g) r += rank_of(v);
        sum += r * r / static_cast<double>(g.size());
    }
    const double h_raw = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    std::map<double, double> counts;
    for (double v : pooled) counts[v] += 1.0;
    double ties = 0.0;
    for (const auto& [v, t] : counts) ties += t * t * t - t;
    KwResult r;
    r.tie_correction = 1.0 - ties / (n * n * n - n);
    r.h = r.tie_correction > 0.0 ? h_raw / r.tie_correction : 0.0;
    return r;
}

std::vector<int> component_sizes(const std::vector<std::vector<int>>& grid) {
    const int h = static_cast<int>(grid.size());
    const int w = h ? static_cast<int>(grid[0].size()) : 0;
    std::vector<std::vector<int>> seen(static_cast<std::size_t>(h), std::vector<int>(static_cast<std::size_t>(w), 0));
    std::vector<int> sizes;
    std::function<int(int, int)> fill = [&](int x, int y) -> int {
        int total = 0;
        std::vector<std::pair<int, int>> todo{{x, y}};
        seen[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = 1;
        while (!todo.empty()) {
            auto [cx, cy] = todo.back();
            todo.pop_back();
            ++total;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = cx + dx, ny = cy + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    auto& s = seen[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)];
                    if (!s && grid[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)]) {
                        s = 1;
                        todo.emplace_back(nx, ny);
                    }
                }
        }
        return total;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (grid[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] && !seen[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)])
                sizes.push_back(fill(x, y));
    std::sort(sizes.rbegin(), sizes.rend());
    return sizes;
}

}  // namespace circa::oracle

namespace circa::oracle {

std::vector<double> first_order(const std::vector<double>& values, double bin_width) {
    const double n = static_cast<double>(values.size());
    double lo = values[0], hi = values[0], sum = 0.0, energy = 0.0;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        energy += v * v;
    }
    const double mean = sum / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0, mad = 0.0;
    for (double v : values) {
        m2 += (v - mean) * (v - mean) / n;
        m3 += (v - mean) * (v - mean) * (v - mean) / n;
        m4 += (v - mean) * (v - mean) * (v - mean) * (v - mean) / n;
        mad += std::abs(v - mean) / n;
    }
    const double p10 = quantile(values, 0.1);
    const double p90 = quantile(values, 0.9);
    double rsum = 0.0, rcount = 0.0;
    for (double v : values)
        if (v >= p10 && v <= p90) {
            rsum += v;
            rcount += 1.0;
        }
    double rmad = 0.0;
    for (double v : values)
        if (v >= p10 && v <= p90) rmad += std::abs(v - rsum / rcount) / rcount;
    std::map<long, double> hist;
    for (double v : values) hist[static_cast<long>(std::floor((v - lo) / bin_width + 1e-9))] += 1.0;
    double entropy = 0.0, uniformity = 0.0;
    for (const auto& [bin, c] : hist) {
        const double p = c / n;
        entropy -= p * std::log2(p);
        uniformity += p * p;
    }
    const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    const double kurt = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
    return {energy, energy, entropy, lo, p10, p90, hi, mean, quantile(values, 0.5),
            quantile(values, 0.75) - quantile(values, 0.25), hi - lo, mad, rmad, std::sqrt(energy / n),
            std::sqrt(m2), skew, kurt, m2, uniformity};
}

std::vector<std::vector<double>> glcm(const LevelGrid& grid, int n_levels,
                                      const std::vector<std::pair<int, int>>& offsets) {
    const auto ng = static_cast<std::size_t>(n_levels);
    std::vector<std::vector<double>> avg(ng, std::vector<double>(ng, 0.0));
    int used = 0;
    const int rows = static_cast<int>(grid.size());
    const int cols = static_cast<int>(grid[0].size());
    for (const auto& [dx, dy] : offsets) {
        std::vector<std::pair<int, int>> pairs;
        for (int y = 0; y < rows; ++y)
            for (int x = 0; x < cols; ++x) {
                const int x2 = x + dx, y2 = y + dy;
                if (x2 < 0 || y2 < 0 || x2 >= cols || y2 >= rows) continue;
                if (grid[y][x] == 0 || grid[y2][x2] == 0) continue;
                pairs.emplace_back(grid[y][x], grid[y2][x2]);
                pairs.emplace_back(grid[y2][x2], grid[y][x]);
            }
        if (pairs.empty()) continue;
        ++used;
        for (const auto& [a, b] : pairs) avg[a - 1][b - 1] += 1.0 / static_cast<double>(pairs.size());
    }
    for (auto& row : avg)
        for (double& v : row) v /= used;
    return avg;
}

GlcmSubset glcm_subset(const std::vector<std::vector<double>>& p) {
    const std::size_t ng = p.size();
    GlcmSubset s{};
    double mux = 0.0, muy = 0.0;
    for (std::size_t i = 0; i < ng; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            mux += static_cast<double>(i + 1) * p[i][j];
            muy += static_cast<double>(j + 1) * p[i][j];
        }
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < ng; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            const double a = static_cast<double>(i + 1), b = static_cast<double>(j + 1), v = p[i][j];
            vx += (a - mux) * (a - mux) * v;
            vy += (b - muy) * (b - muy) * v;
            cov += (a - mux) * (b - muy) * v;
            s.autocorrelation += a * b * v;
            s.cluster_tendency += (a + b - mux - muy) * (a + b - mux - muy) * v;
            s.contrast += (a - b) * (a - b) * v;
            s.difference_average += std::abs(a - b) * v;
            s.joint_energy += v * v;
            if (v > 0.0) s.joint_entropy -= v * std::log2(v);
            s.idm += v / (1.0 + (a - b) * (a - b));
            s.id += v / (1.0 + std::abs(a - b));
            s.maximum_probability = std::max(s.maximum_probability, v);
            s.sum_average += (a + b) * v;
        }
    s.joint_average = mux;
    s.sum_squares = vx;
    s.correlation = (vx > 0.0 && vy > 0.0) ? cov / std::sqrt(vx * vy) : 1.0;
    return s;
}

std::vector<std::pair<int, int>> runs(const LevelGrid& grid, int dx, int dy) {
    const int rows = static_cast<int>(grid.size());
    const int cols = static_cast<int>(grid[0].size());
    auto level = [&](int x, int y) { return (x < 0 || y < 0 || x >= cols || y >= rows) ? 0 : grid[y][x]; };
    std::vector<std::vector<bool>> used(grid.size(), std::vector<bool>(grid[0].size(), false));
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
            if (level(x, y) == 0 || used[y][x]) continue;
            // Walk back to the start of the run, then forward to its end.
            int sx = x, sy = y;
            while (level(sx - dx, sy - dy) == level(x, y)) {
                sx -= dx;
                sy -= dy;
            }
            int len = 0;
            while (level(sx, sy) == level(x, y)) {
                used[sy][sx] = true;
                sx += dx;
                sy += dy;
                ++len;
            }
            out.emplace_back(level(x, y), len);
        }
    return out;
}

std::vector<double> glrlm(const std::vector<std::vector<std::pair<int, int>>>& runs_per_direction, double n_pixels) {
    std::map<std::pair<int, int>, double> m;
    const double nd = static_cast<double>(runs_per_direction.size());
    for (const auto& list : runs_per_direction)
        for (const auto& r : list) m[r] += 1.0 / nd;
    double nr = 0.0;
    for (const auto& [k, c] : m) nr += c;
    std::map<int, double> gl, rl;
    std::vector<double> f(16, 0.0);
    double mi = 0.0, mj = 0.0;
    for (const auto& [k, c] : m) {
        const double i = k.first, j = k.second;
        gl[k.first] += c;
        rl[k.second] += c;
        f[0] += c / (j * j) / nr;
        f[1] += c * j * j / nr;
        f[10] += c / (i * i) / nr;
        f[11] += c * i * i / nr;
        f[12] += c / (i * i * j * j) / nr;
        f[13] += c * i * i / (j * j) / nr;
        f[14] += c * j * j / (i * i) / nr;
        f[15] += c * i * i * j * j / nr;
        mi += i * c / nr;
        mj += j * c / nr;
        f[9] -= (c / nr) * std::log2(c / nr);
    }
    for (const auto& [k, c] : m) {
        f[7] += (c / nr) * (k.first - mi) * (k.first - mi);
        f[8] += (c / nr) * (k.second - mj) * (k.second - mj);
    }
    for (const auto& [lvl, c] : gl) f[2] += c * c / nr;
    for (const auto& [len, c] : rl) f[4] += c * c / nr;
    f[3] = f[2] / nr;
    f[5] = f[4] / nr;
    f[6] = nr / n_pixels;
    return f;
}

}  // namespace circa::oracle

namespace circa::oracle {
namespace {

double gini_of(const std::vector<std::size_t>& idx, const std::vector<int>& labels, const std::array<double, 3>& cw,
               double* total_weight) {
    std::array<double, 3> w{};
    for (std::size_t i : idx) w[static_cast<std::size_t>(labels[i])] += cw[static_cast<std::size_t>(labels[i])];
    const double s = w[0] + w[1] + w[2];
    *total_weight = s;
    if (s <= 0.0) return 0.0;
    return 1.0 - (w[0] / s) * (w[0] / s) - (w[1] / s) * (w[1] / s) - (w[2] / s) * (w[2] / s);
}

void cart_node(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
               const std::vector<std::size_t>& idx, int depth, int max_depth, int min_leaf,
               const std::array<double, 3>& cw, std::vector<CartNode>& out) {
    const int id = static_cast<int>(out.size());
    out.push_back(CartNode{});
    std::set<int> classes;
    for (std::size_t i : idx) classes.insert(labels[i]);
    if (depth >= max_depth || classes.size() <= 1 || idx.size() < 2 * static_cast<std::size_t>(min_leaf)) return;
    double parent_w = 0.0;
    const double parent = gini_of(idx, labels, cw, &parent_w);
    double best = parent - 1e-12;
    int best_f = -1;
    double best_t = 0.0;
    for (std::size_t f = 0; f < rows[0].size(); ++f) {
        std::set<double> values;
        for (std::size_t i : idx) values.insert(rows[i][f]);
        std::vector<double> sorted(values.begin(), values.end());
        for (std::size_t v = 0; v + 1 < sorted.size(); ++v) {
            const double t = sorted[v] + (sorted[v + 1] - sorted[v]) / 2.0;
            std::vector<std::size_t> l, r;
            for (std::size_t i : idx) (rows[i][f] <= t ? l : r).push_back(i);
            if (l.size() < static_cast<std::size_t>(min_leaf) || r.size() < static_cast<std::size_t>(min_leaf)) continue;
            double wl = 0.0, wr = 0.0;
            const double gl = gini_of(l, labels, cw, &wl);
            const double gr = gini_of(r, labels, cw, &wr);
            const double imp = (wl * gl + wr * gr) / parent_w;
            if (imp < best) {
                best = imp - 1e-12;
                best_f = static_cast<int>(f);
                best_t = t;
            }
        }
    }
    if (best_f < 0) return;
    std::vector<std::size_t> l, r;
    for (std::size_t i : idx) (rows[i][static_cast<std::size_t>(best_f)] <= best_t ? l : r).push_back(i);
    out[static_cast<std::size_t>(id)].feature = best_f;
    out[static_cast<std::size_t>(id)].threshold = best_t;
    out[static_cast<std::size_t>(id)].left = static_cast<int>(out.size());
    cart_node(rows, labels, l, depth + 1, max_depth, min_leaf, cw, out);
    out[static_cast<std::size_t>(id)].right = static_cast<int>(out.size());
    cart_node(rows, labels, r, depth + 1, max_depth, min_leaf, cw, out);
}

}  // namespace

std::vector<CartNode> cart(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels, int max_depth,
                           int min_leaf, const std::array<double, 3>& class_weights) {
    std::vector<std::size_t> idx(rows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<CartNode> out;
    cart_node(rows, labels, idx, 0, max_depth, min_leaf, class_weights, out);
    return out;
}

double gaussian2d(double x, double y, double mx, double my, const std::array<double, 3>& cov) {
    const double det = cov[0] * cov[2] - cov[1] * cov[1];
    const double i00 = cov[2] / det, i01 = -cov[1] / det, i11 = cov[0] / det;
    const double dx = x - mx, dy = y - my;
    const double q = dx * (i00 * dx + i01 * dy) + dy * (i01 * dx + i11 * dy);
    return std::exp(-0.5 * q) / (2.0 * 3.14159265358979323846 * std::sqrt(det));
}

std::vector<std::size_t> knn_scan(const std::vector<std::vector<double>>& rows, const std::vector<double>& query,
                                  std::size_t k) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double dot = 0.0, a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < query.size(); ++j) {
            dot += rows[i][j] * query[j];
            a += rows[i][j] * rows[i][j];
            b += query[j] * query[j];
        }
        d.emplace_back(1.0 - dot / std::sqrt(a * b), i);
    }
    std::sort(d.begin(), d.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k && i < d.size(); ++i) out.push_back(d[i].second);
    return out;
}

}  // namespace circa::oracle
