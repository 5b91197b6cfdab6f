#include "graspkit/workspace.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace gk {

namespace {

std::vector<double> grid_config(const GripperModel& model, std::int64_t index,
                                std::int64_t per_axis) {
    const int a = model.n_actuated();
    std::vector<double> q(a);
    std::int64_t rest = index;
    for (int i = 0; i < a; ++i) {
        const std::int64_t step = rest % per_axis;
        rest /= per_axis;
        const auto& lim = model.actuated_limits[i];
        q[i] = per_axis == 1 ? 0.5 * (lim.lo + lim.hi)
                             : lim.lo + (lim.hi - lim.lo) * static_cast<double>(step) /
                                   static_cast<double>(per_axis - 1);
    }
    return q;
}

}  // namespace

WorkspaceMatrix sample_workspace(const GripperModel& model, std::int64_t count,
                                 std::uint64_t seed, SampleStrategy strategy) {
    if (count < 1) throw DomainError("sample_workspace: L must be >= 1");
    const int a = model.n_actuated();
    const int n = model.n_fingers;

    WorkspaceMatrix ws;
    ws.n_fingers = n;
    ws.samples.resize(count, 3 * n);
    ws.configs.reserve(count);

    std::mt19937_64 rng(seed);
    std::vector<std::uniform_real_distribution<double>> dists;
    dists.reserve(a);
    for (int i = 0; i < a; ++i) {
        dists.emplace_back(model.actuated_limits[i].lo, model.actuated_limits[i].hi);
    }
    const std::int64_t per_axis = strategy == SampleStrategy::Grid
        ? static_cast<std::int64_t>(std::ceil(std::pow(static_cast<double>(count), 1.0 / a)))
        : 0;

    std::int64_t row = 0;
    std::int64_t attempts = 0;
    const std::int64_t max_attempts = 100 * count;
    while (row < count) {
        if (++attempts > max_attempts) {
            throw NumericError("sample_workspace: could not draw enough non-singular configs");
        }
        std::vector<double> q;
        if (strategy == SampleStrategy::Grid) {
            q = grid_config(model, row, per_axis);
        } else {
            q.resize(a);
            for (int i = 0; i < a; ++i) q[i] = dists[i](rng);
        }
        std::vector<Vec3> tips;
        try {
            tips = forward_kinematics(model, q);
        } catch (const SingularityError&) {
            if (strategy == SampleStrategy::Grid) {
                // Nudge the grid point toward the limit-box center and retry once.
                auto mid = model.mid_config();
                for (int i = 0; i < a; ++i) q[i] = q[i] + 1e-6 * (mid[i] - q[i]);
                try {
                    tips = forward_kinematics(model, q);
                } catch (const SingularityError&) {
                    continue;
                }
            } else {
                continue;
            }
        }
        for (int f = 0; f < n; ++f) ws.samples.block<1, 3>(row, 3 * f) = tips[f].transpose();
        ws.configs.push_back(std::move(q));
        ++row;
    }
    return ws;
}

double coupled_chamfer(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, int n_fingers) {
    if (s1.cols() != 3 * n_fingers || s2.cols() != 3 * n_fingers) {
        throw DomainError("coupled_chamfer: finger-count mismatch");
    }
    double total = 0;
    for (int f = 0; f < n_fingers; ++f) {
        const auto a = s1.middleCols(3 * f, 3);
        const auto b = s2.middleCols(3 * f, 3);
        for (std::int64_t j = 0; j < a.rows(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (std::int64_t k = 0; k < b.rows(); ++k) {
                best = std::min(best, (a.row(j) - b.row(k)).squaredNorm());
            }
            total += best;
        }
        for (std::int64_t j = 0; j < b.rows(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (std::int64_t k = 0; k < a.rows(); ++k) {
                best = std::min(best, (b.row(j) - a.row(k)).squaredNorm());
            }
            total += best;
        }
    }
    return total;
}

double coupled_chamfer(const WorkspaceMatrix& s1, const WorkspaceMatrix& s2) {
    if (s1.n_fingers != s2.n_fingers) {
        throw DomainError("coupled_chamfer: finger-count mismatch");
    }
    return coupled_chamfer(s1.samples, s2.samples, s1.n_fingers);
}

namespace {

constexpr char kMagic[4] = {'W', 'S', 'M', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw DataError("workspace file: truncated header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void save_workspace(const WorkspaceMatrix& ws, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open for write: " + path);
    out.write(kMagic, 4);
    write_u64(out, static_cast<std::uint64_t>(ws.rows()));
    write_u64(out, static_cast<std::uint64_t>(ws.n_fingers));
    for (std::int64_t r = 0; r < ws.rows(); ++r) {
        for (std::int64_t c = 0; c < ws.samples.cols(); ++c) {
            const double v = ws.samples(r, c);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    }
    for (const auto& q : ws.configs) {
        for (double v : q) out.write(reinterpret_cast<const char*>(&v), 8);
    }
}

WorkspaceMatrix load_workspace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("workspace file: bad magic");
    }
    const auto l = static_cast<std::int64_t>(read_u64(in));
    const auto n = static_cast<std::int64_t>(read_u64(in));
    if (l < 1 || n < 1 || n > 64) throw DataError("workspace file: implausible header counts");

    WorkspaceMatrix ws;
    ws.n_fingers = static_cast<int>(n);
    ws.samples.resize(l, 3 * n);
    for (std::int64_t r = 0; r < l; ++r) {
        for (std::int64_t c = 0; c < 3 * n; ++c) {
            double v = 0;
            in.read(reinterpret_cast<char*>(&v), 8);
            if (!in) throw DataError("workspace file: truncated sample block");
            ws.samples(r, c) = v;
        }
    }
    // Remaining doubles are the L generating configs; A is inferred.
    const auto pos = in.tellg();
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(pos);
    const std::int64_t remaining = static_cast<std::int64_t>(end - pos);
    if (remaining % (8 * l) != 0) throw DataError("workspace file: config block shape mismatch");
    const std::int64_t a = remaining / (8 * l);
    ws.configs.assign(l, std::vector<double>(a));
    for (std::int64_t r = 0; r < l; ++r) {
        for (std::int64_t i = 0; i < a; ++i) {
            double v = 0;
            in.read(reinterpret_cast<char*>(&v), 8);
            if (!in) throw DataError("workspace file: truncated config block");
            ws.configs[r][static_cast<std::size_t>(i)] = v;
        }
    }
    return ws;
}

}  // namespace gk
