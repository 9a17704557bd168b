// Acceptance suite: one PASS/FAIL line per criterion. Criteria 1-8 run with
// four workers; criterion 9 reruns them with one worker and compares every
// output file byte for byte.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "roughctl/columnar_io.hpp"
#include "roughctl/harness.hpp"
#include "roughctl/parallel.hpp"
#include "roughctl/rough_path.hpp"

using namespace roughctl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<Outcome(const fs::path& dir, std::size_t workers)> body;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Algebraic identities on random rough paths; writes the worst errors.
Outcome algebraic(const fs::path& dir, std::size_t) {
    fs::create_directories(dir);
    std::mt19937_64 rng(20240611);
    double chen = 0.0, geo = 0.0;
    std::ostringstream csv;
    csv << "path,dim,steps,chen_error,geometric_error\n";
    for (int p = 0; p < 100; ++p) {
        const std::size_t d = 1 + rng() % 3;
        const std::size_t n = 1 + rng() % 256;
        const double T = 0.25 + static_cast<double>(rng() % 1000) / 250.0;
        const TimeGrid grid = make_uniform_grid(T, n);
        GridRoughPath path = [&] {
            if (p % 2 == 0) return sample_brownian_lift(rng(), grid, 1 + rng() % 4, d);
            std::normal_distribution<double> nd;
            Mat v(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n + 1));
            for (Eigen::Index k = 0; k < v.cols(); ++k)
                for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, k) = nd(rng);
            return lift_piecewise_linear(grid, v);
        }();
        double pc = 0.0, pg = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            std::size_t idx[3] = {rng() % (n + 1), rng() % (n + 1), rng() % (n + 1)};
            std::sort(idx, idx + 3);
            const Increment whole = path.increment(idx[0], idx[2]);
            const Increment split = chen_combine(path.increment(idx[0], idx[1]), path.increment(idx[1], idx[2]));
            pc = std::max({pc, (whole.delta - split.delta).cwiseAbs().maxCoeff(),
                           (whole.area - split.area).cwiseAbs().maxCoeff()});
            const Mat sym = 0.5 * (whole.area + whole.area.transpose()) - 0.5 * whole.delta * whole.delta.transpose();
            pg = std::max(pg, sym.cwiseAbs().maxCoeff());
        }
        chen = std::max(chen, pc);
        geo = std::max(geo, pg);
        csv << p << ',' << d << ',' << n << ',' << format_double(pc) << ',' << format_double(pg) << '\n';
    }
    write_file(dir / "algebraic.csv", csv.str());
    return {chen <= 1e-12 && geo <= 1e-12, "chen " + fmt(chen) + ", geometric " + fmt(geo) + " (limit 1e-12)"};
}

ExperimentConfig base(const fs::path& dir, std::size_t workers) {
    ExperimentConfig c;
    c.out = dir.string();
    c.workers = workers;
    return c;
}

std::string check_summary(const json& rec) {
    std::string s;
    if (rec.contains("error")) return "error: " + rec["error"]["message"].get<std::string>();
    for (const auto& c : rec["checks"]) {
        if (!s.empty()) s += ", ";
        s += c["name"].get<std::string>() + (c["pass"].get<bool>() ? " ok " : " FAILED ") +
             fmt(c["value"].get<double>()) + "/" + fmt(c["limit"].get<double>());
    }
    return s;
}

Outcome harness(const std::string& command, const ExperimentConfig& c) {
    const RunRecord r = run_command(command, c);
    return {r.exit_code == 0, check_summary(r.record)};
}

Outcome lqc_checks(const fs::path& dir, std::size_t workers, const std::string& fixture,
                   std::vector<std::string> checks) {
    ExperimentConfig c = base(dir, workers);
    c.fixture = fixture;
    c.checks.enabled = std::move(checks);
    return harness("lqc-verify", c);
}

// Every file of `a` must exist in `b` with identical bytes. In record.json the
// echoed worker count and output directory legitimately differ and are dropped.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why, std::size_t& compared) {
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        const fs::path other = b / rel;
        if (!fs::exists(other)) {
            why = rel.string() + " missing";
            return false;
        }
        auto slurp = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::stringstream s;
            s << in.rdbuf();
            return s.str();
        };
        std::string x = slurp(entry.path()), y = slurp(other);
        if (rel.filename() == "record.json") {
            json jx = json::parse(x), jy = json::parse(y);
            for (json* j : {&jx, &jy}) {
                if (j->contains("config")) {
                    (*j)["config"].erase("workers");
                    (*j)["config"].erase("out");
                }
            }
            x = jx.dump();
            y = jy.dump();
        }
        if (x != y) {
            why = rel.string() + " differs";
            return false;
        }
        ++compared;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::remove_all(root);

    const std::vector<Criterion> criteria = {
        {1, "algebraic exactness (Chen, geometricity)", 1.0, algebraic},
        {2, "Wong-Zakai convergence ladder", 30.0,
         [](const fs::path& d, std::size_t w) { return harness("wong-zakai", base(d, w)); }},
        {3, "LQC additive gap closure", 300.0,
         [](const fs::path& d, std::size_t w) { return lqc_checks(d, w, "lqc-additive", {"lower", "upper", "gap"}); }},
        {4, "additive penalty identity", 120.0,
         [](const fs::path& d, std::size_t w) { return lqc_checks(d, w, "lqc-additive", {"identity"}); }},
        {5, "LQC multiplicative formulas and gap closure", 600.0,
         [](const fs::path& d, std::size_t w) {
             return lqc_checks(d, w, "lqc-multiplicative", {"formulas", "lower", "upper", "gap"});
         }},
        {6, "rough HJB against the translation closed form", 120.0,
         [](const fs::path& d, std::size_t w) { return harness("hjb", base(d, w)); }},
        {7, "rough PMP residual and spike ladder", 60.0,
         [](const fs::path& d, std::size_t w) { return harness("pmp", base(d, w)); }},
        {8, "zero-mean penalties", 120.0,
         [](const fs::path& d, std::size_t w) { return lqc_checks(d, w, "lqc-additive", {"zero_mean"}); }},
    };

    bool all = true;
    auto report = [&](int id, const char* title, bool pass, double secs, double budget, const std::string& detail) {
        if (budget > 0.0) {
            std::printf("[%s] %d %s: %s; %.1f s (budget %.0f s)\n", pass ? "PASS" : "FAIL", id, title, detail.c_str(),
                        secs, budget);
        } else {
            std::printf("[%s] %d %s: %s; %.1f s\n", pass ? "PASS" : "FAIL", id, title, detail.c_str(), secs);
        }
        std::fflush(stdout);
        all = all && pass;
    };

    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body(root / "w4" / ("c" + std::to_string(c.id)), 4);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report(c.id, c.title, o.pass && secs < c.budget_seconds, secs, c.budget_seconds, o.detail);
    }

    // Determinism: rerun every criterion with one worker.
    const auto t0 = std::chrono::steady_clock::now();
    bool same = true;
    std::string detail;
    std::size_t compared = 0;
    for (const Criterion& c : criteria) {
        const std::string name = "c" + std::to_string(c.id);
        try {
            c.body(root / "w1" / name, 1);
        } catch (const std::exception& e) {
            same = false;
            detail = name + ": exception " + e.what();
            break;
        }
        std::string why;
        if (!same_tree(root / "w4" / name, root / "w1" / name, why, compared) ||
            !same_tree(root / "w1" / name, root / "w4" / name, why, compared)) {
            same = false;
            detail = name + ": " + why;
            break;
        }
    }
    if (same) detail = std::to_string(compared / 2) + " files identical across runs with 4 and 1 workers";
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(9, "determinism", same, secs, 0.0, detail);
    return all ? 0 : 1;
}
