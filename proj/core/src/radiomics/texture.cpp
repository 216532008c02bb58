#include "circa/radiomics/texture.hpp"

#include "circa/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace circa::radiomics {
namespace {

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// Sparse (level, size) histogram shared by the run-length, zone and
// dependence families.
using SizeHistogram = std::map<std::pair<int, int>, double>;

struct SizeStats {
    double total = 0.0;  // number of runs / zones / dependences
    double short_emph = 0.0, long_emph = 0.0;
    double gln = 0.0, sn = 0.0;
    double glv = 0.0, sv = 0.0, entropy = 0.0;
    double low_gl = 0.0, high_gl = 0.0;
    double short_low = 0.0, short_high = 0.0, long_low = 0.0, long_high = 0.0;
};

SizeStats size_stats(const SizeHistogram& hist) {
    SizeStats s;
    std::map<int, double> by_level;
    std::map<int, double> by_size;
    for (const auto& [key, c] : hist) {
        s.total += c;
        by_level[key.first] += c;
        by_size[key.second] += c;
    }
    if (s.total <= 0.0) throw Error(ErrorCode::EmptySegment, "texture matrix is empty");
    double mu_i = 0.0;
    double mu_j = 0.0;
    for (const auto& [key, c] : hist) {
        const double i = key.first;
        const double j = key.second;
        const double p = c / s.total;
        mu_i += p * i;
        mu_j += p * j;
        s.short_emph += c / (j * j);
        s.long_emph += c * j * j;
        s.low_gl += c / (i * i);
        s.high_gl += c * i * i;
        s.short_low += c / (i * i * j * j);
        s.short_high += c * i * i / (j * j);
        s.long_low += c * j * j / (i * i);
        s.long_high += c * i * i * j * j;
        s.entropy -= xlog2x(p);
    }
    for (const auto& [key, c] : hist) {
        const double p = c / s.total;
        s.glv += p * (key.first - mu_i) * (key.first - mu_i);
        s.sv += p * (key.second - mu_j) * (key.second - mu_j);
    }
    for (const auto& [lvl, c] : by_level) s.gln += c * c;
    for (const auto& [sz, c] : by_size) s.sn += c * c;
    s.short_emph /= s.total;
    s.long_emph /= s.total;
    s.low_gl /= s.total;
    s.high_gl /= s.total;
    s.short_low /= s.total;
    s.short_high /= s.total;
    s.long_low /= s.total;
    s.long_high /= s.total;
    return s;
}

std::array<double, 16> size_family(const SizeHistogram& hist, double n_pixels) {
    const SizeStats s = size_stats(hist);
    return {s.short_emph,
            s.long_emph,
            s.gln / s.total,
            s.gln / (s.total * s.total),
            s.sn / s.total,
            s.sn / (s.total * s.total),
            s.total / n_pixels,
            s.glv,
            s.sv,
            s.entropy,
            s.low_gl,
            s.high_gl,
            s.short_low,
            s.short_high,
            s.long_low,
            s.long_high};
}

constexpr int kNeighbours[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};

}  // namespace

std::size_t LevelImage::pixel_count() const {
    return static_cast<std::size_t>(std::count_if(levels.begin(), levels.end(), [](int l) { return l > 0; }));
}

std::vector<Offset> default_offsets() { return {{1, 0}, {1, 1}, {0, 1}, {-1, 1}}; }

std::vector<double> glcm_matrix(const LevelImage& img, const std::vector<Offset>& offsets) {
    const auto ng = static_cast<std::size_t>(img.n_levels);
    if (ng == 0) throw Error(ErrorCode::EmptySegment, "GLCM of an empty segment");
    std::vector<double> avg(ng * ng, 0.0);
    int used = 0;
    std::vector<double> m(ng * ng);
    for (const auto& [dx, dy] : offsets) {
        std::fill(m.begin(), m.end(), 0.0);
        double total = 0.0;
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (!img.inside(x, y) || !img.inside(x + dx, y + dy)) continue;
                const auto a = static_cast<std::size_t>(img.at(x, y) - 1);
                const auto b = static_cast<std::size_t>(img.at(x + dx, y + dy) - 1);
                m[a * ng + b] += 1.0;
                m[b * ng + a] += 1.0;
                total += 2.0;
            }
        }
        if (total <= 0.0) continue;
        for (std::size_t k = 0; k < m.size(); ++k) avg[k] += m[k] / total;
        ++used;
    }
    if (used == 0) throw Error(ErrorCode::EmptySegment, "segment has no neighbouring pixel pair");
    for (double& v : avg) v /= used;
    return avg;
}

std::array<double, 24> glcm_features_from_matrix(const std::vector<double>& p, int n_levels) {
    const auto ng = static_cast<std::size_t>(n_levels);
    std::vector<double> px(ng, 0.0);
    std::vector<double> py(ng, 0.0);
    for (std::size_t i = 0; i < ng; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            px[i] += p[i * ng + j];
            py[j] += p[i * ng + j];
        }
    double mux = 0.0, muy = 0.0;
    for (std::size_t i = 0; i < ng; ++i) {
        mux += static_cast<double>(i + 1) * px[i];
        muy += static_cast<double>(i + 1) * py[i];
    }
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < ng; ++i) {
        sx += px[i] * (static_cast<double>(i + 1) - mux) * (static_cast<double>(i + 1) - mux);
        sy += py[i] * (static_cast<double>(i + 1) - muy) * (static_cast<double>(i + 1) - muy);
    }
    sx = std::sqrt(sx);
    sy = std::sqrt(sy);

    std::vector<double> pdiff(ng, 0.0);
    std::vector<double> psum(2 * ng + 1, 0.0);
    double autocorr = 0.0, prom = 0.0, shade = 0.0, tend = 0.0, contrast = 0.0;
    double energy = 0.0, hxy = 0.0, hxy1 = 0.0, hxy2 = 0.0;
    double idm = 0.0, idmn = 0.0, id = 0.0, idn = 0.0, maxp = 0.0, sumsq = 0.0;
    const double ngd = static_cast<double>(ng);
    for (std::size_t a = 0; a < ng; ++a) {
        for (std::size_t b = 0; b < ng; ++b) {
            const double v = p[a * ng + b];
            const double i = static_cast<double>(a + 1);
            const double j = static_cast<double>(b + 1);
            const double d = std::abs(i - j);
            const double c = i + j - mux - muy;
            pdiff[static_cast<std::size_t>(d)] += v;
            psum[a + b + 2] += v;
            autocorr += v * i * j;
            prom += v * c * c * c * c;
            shade += v * c * c * c;
            tend += v * c * c;
            contrast += v * d * d;
            energy += v * v;
            hxy -= xlog2x(v);
            const double pxy = px[a] * py[b];
            if (v > 0.0 && pxy > 0.0) hxy1 -= v * std::log2(pxy);
            hxy2 -= xlog2x(pxy);
            idm += v / (1.0 + d * d);
            idmn += v / (1.0 + d * d / (ngd * ngd));
            id += v / (1.0 + d);
            idn += v / (1.0 + d / ngd);
            maxp = std::max(maxp, v);
            sumsq += v * (i - mux) * (i - mux);
        }
    }
    double hx = 0.0, hy = 0.0;
    for (std::size_t i = 0; i < ng; ++i) {
        hx -= xlog2x(px[i]);
        hy -= xlog2x(py[i]);
    }
    double diff_avg = 0.0, diff_ent = 0.0, inv_var = 0.0;
    for (std::size_t k = 0; k < ng; ++k) {
        diff_avg += static_cast<double>(k) * pdiff[k];
        diff_ent -= xlog2x(pdiff[k]);
        if (k > 0) inv_var += pdiff[k] / static_cast<double>(k * k);
    }
    double diff_var = 0.0;
    for (std::size_t k = 0; k < ng; ++k) diff_var += (static_cast<double>(k) - diff_avg) * (static_cast<double>(k) - diff_avg) * pdiff[k];
    double sum_avg = 0.0, sum_ent = 0.0;
    for (std::size_t k = 2; k <= 2 * ng; ++k) {
        sum_avg += static_cast<double>(k) * psum[k];
        sum_ent -= xlog2x(psum[k]);
    }

    const double correlation = (sx * sy > 0.0) ? (autocorr - mux * muy) / (sx * sy) : 1.0;
    const double hmax = std::max(hx, hy);
    const double imc1 = hmax > 0.0 ? (hxy - hxy1) / hmax : 0.0;
    const double imc2 = hxy2 > hxy ? std::sqrt(1.0 - std::exp(-2.0 * (hxy2 - hxy))) : 0.0;

    // Maximal correlation coefficient over the occupied gray levels.
    double mcc = 1.0;
    std::vector<std::size_t> occ;
    for (std::size_t i = 0; i < ng; ++i)
        if (px[i] > 0.0) occ.push_back(i);
    if (occ.size() >= 2) {
        const auto k = static_cast<Eigen::Index>(occ.size());
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index c = 0; c < k; ++c) {
                double acc = 0.0;
                for (std::size_t t : occ) {
                    acc += p[occ[static_cast<std::size_t>(r)] * ng + t] * p[occ[static_cast<std::size_t>(c)] * ng + t] /
                           (px[occ[static_cast<std::size_t>(r)]] * py[t]);
                }
                q(r, c) = acc;
            }
        Eigen::EigenSolver<Eigen::MatrixXd> solver(q, false);
        std::vector<double> ev;
        for (Eigen::Index i = 0; i < k; ++i) ev.push_back(solver.eigenvalues()(i).real());
        std::sort(ev.begin(), ev.end(), std::greater<double>());
        mcc = std::sqrt(std::clamp(ev[1], 0.0, 1.0));
    }

    return {autocorr, mux, prom, shade, tend, contrast, correlation, diff_avg, diff_ent, diff_var, energy, hxy,
            imc1, imc2, idm, idmn, id, idn, inv_var, maxp, sum_avg, sum_ent, sumsq, mcc};
}

std::array<double, 24> glcm_features(const LevelImage& img, const std::vector<Offset>& offsets) {
    return glcm_features_from_matrix(glcm_matrix(img, offsets), img.n_levels);
}

RunLengthMatrix glrlm_matrix(const LevelImage& img, const std::vector<Offset>& directions) {
    if (directions.empty()) throw Error(ErrorCode::InvalidArgument, "run-length matrix needs a direction");
    RunLengthMatrix m;
    m.n_levels = img.n_levels;
    m.max_length = std::max(img.width, img.height);
    m.n_pixels = static_cast<double>(img.pixel_count());
    if (m.n_pixels <= 0.0 || m.n_levels <= 0) throw Error(ErrorCode::EmptySegment, "run lengths of an empty segment");
    m.counts.assign(static_cast<std::size_t>(m.n_levels) * static_cast<std::size_t>(m.max_length), 0.0);
    for (const auto& [dx, dy] : directions) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (!img.inside(x, y)) continue;
                const int lvl = img.at(x, y);
                // Only start counting at the first pixel of a run.
                if (img.inside(x - dx, y - dy) && img.at(x - dx, y - dy) == lvl) continue;
                int len = 1;
                while (img.inside(x + len * dx, y + len * dy) && img.at(x + len * dx, y + len * dy) == lvl) ++len;
                m.counts[static_cast<std::size_t>(lvl - 1) * static_cast<std::size_t>(m.max_length) +
                         static_cast<std::size_t>(len - 1)] += 1.0;
            }
        }
    }
    for (double& c : m.counts) c /= static_cast<double>(directions.size());
    return m;
}

std::array<double, 16> glrlm_features_from_matrix(const RunLengthMatrix& m) {
    SizeHistogram hist;
    for (int i = 0; i < m.n_levels; ++i)
        for (int j = 0; j < m.max_length; ++j) {
            const double c = m.counts[static_cast<std::size_t>(i) * static_cast<std::size_t>(m.max_length) + static_cast<std::size_t>(j)];
            if (c > 0.0) hist[{i + 1, j + 1}] = c;
        }
    return size_family(hist, m.n_pixels);
}

std::array<double, 16> glrlm_features(const LevelImage& img, const std::vector<Offset>& directions) {
    return glrlm_features_from_matrix(glrlm_matrix(img, directions));
}

std::array<double, 16> glszm_features(const LevelImage& img) {
    const std::size_t n = img.levels.size();
    std::vector<char> seen(n, 0);
    SizeHistogram hist;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(x);
            if (!img.inside(x, y) || seen[idx]) continue;
            const int lvl = img.at(x, y);
            int size = 0;
            seen[idx] = 1;
            stack.assign(1, {x, y});
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                ++size;
                for (const auto& nb : kNeighbours) {
                    const int nx = cx + nb[0];
                    const int ny = cy + nb[1];
                    if (!img.inside(nx, ny) || img.at(nx, ny) != lvl) continue;
                    const std::size_t nidx = static_cast<std::size_t>(ny) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(nx);
                    if (seen[nidx]) continue;
                    seen[nidx] = 1;
                    stack.emplace_back(nx, ny);
                }
            }
            hist[{lvl, size}] += 1.0;
        }
    }
    if (hist.empty()) throw Error(ErrorCode::EmptySegment, "size zones of an empty segment");
    return size_family(hist, static_cast<double>(img.pixel_count()));
}

std::array<double, 12> ngtdm_features(const LevelImage& img) {
    const auto ng = static_cast<std::size_t>(img.n_levels);
    if (ng == 0 || img.pixel_count() == 0) throw Error(ErrorCode::EmptySegment, "NGTDM of an empty segment");
    std::vector<double> s(ng, 0.0);
    std::vector<double> count(ng, 0.0);
    SizeHistogram dependence;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!img.inside(x, y)) continue;
            const int lvl = img.at(x, y);
            double nsum = 0.0;
            int nvalid = 0;
            int nequal = 0;
            for (const auto& nb : kNeighbours) {
                if (!img.inside(x + nb[0], y + nb[1])) continue;
                const int v = img.at(x + nb[0], y + nb[1]);
                nsum += v;
                ++nvalid;
                if (v == lvl) ++nequal;
            }
            dependence[{lvl, nequal + 1}] += 1.0;
            if (nvalid == 0) continue;
            const auto i = static_cast<std::size_t>(lvl - 1);
            s[i] += std::abs(lvl - nsum / nvalid);
            count[i] += 1.0;
        }
    }

    double nvp = 0.0;
    for (double c : count) nvp += c;
    std::array<double, 12> out{};
    if (nvp > 0.0) {
        std::vector<double> p(ng);
        for (std::size_t i = 0; i < ng; ++i) p[i] = count[i] / nvp;
        double ps = 0.0, s_total = 0.0;
        int ngp = 0;
        for (std::size_t i = 0; i < ng; ++i) {
            ps += p[i] * s[i];
            s_total += s[i];
            if (p[i] > 0.0) ++ngp;
        }
        double contrast_sum = 0.0, busy_den = 0.0, complexity = 0.0, strength_num = 0.0;
        for (std::size_t a = 0; a < ng; ++a) {
            if (p[a] <= 0.0) continue;
            for (std::size_t b = 0; b < ng; ++b) {
                if (p[b] <= 0.0) continue;
                const double i = static_cast<double>(a + 1);
                const double j = static_cast<double>(b + 1);
                contrast_sum += p[a] * p[b] * (i - j) * (i - j);
                busy_den += std::abs(i * p[a] - j * p[b]);
                complexity += std::abs(i - j) * (p[a] * s[a] + p[b] * s[b]) / (p[a] + p[b]);
                strength_num += (p[a] + p[b]) * (i - j) * (i - j);
            }
        }
        out[0] = ps > 0.0 ? 1.0 / ps : 1e6;
        out[1] = ngp > 1 ? contrast_sum / (ngp * (ngp - 1.0)) * s_total / nvp : 0.0;
        out[2] = busy_den > 0.0 ? ps / busy_den : 0.0;
        out[3] = complexity / nvp;
        out[4] = s_total > 0.0 ? strength_num / s_total : 0.0;
    } else {
        out[0] = 1e6;
    }

    const SizeStats d = size_stats(dependence);
    out[5] = d.short_emph;
    out[6] = d.long_emph;
    out[7] = d.gln / d.total;
    out[8] = d.sn / d.total;
    out[9] = d.sn / (d.total * d.total);
    out[10] = d.glv;
    out[11] = d.sv;
    return out;
}

}  // namespace circa::radiomics
