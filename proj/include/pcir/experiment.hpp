#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cstdint>
#include <sstream>
#include <utility>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pcir/baselines.hpp"
#include "pcir/channel.hpp"
#include "pcir/exact_em.hpp"
#include "pcir/field_csv.hpp"
#include "pcir/grid.hpp"
#include "pcir/image_ops.hpp"
#include "pcir/io_util.hpp"
#include "pcir/lbp_em.hpp"
#include "pcir/metrics.hpp"
#include "pcir/pgm.hpp"

namespace pcir {

struct ExperimentPlan {
    std::vector<std::string> images;
    int patches_per_image = 10;
    int patch_width = 64;
    int patch_height = 64;
    double lambda_min = 2.0;
    std::vector<double> lambda_max_list = {20, 40, 60, 80, 100, 120, 140, 160};
    std::vector<std::string> methods = {"ours", "glbp", "median"};
    std::uint64_t master_seed = 1;
    bool resample = true;        // half-size with weak blur before cropping
    double blur_sigma = 1.0;
    RestoreConfig restore;       // knobs for ours/exact
    double glbp_beta0 = 1.0;
};

// Chained hash of heterogeneous parts; the anchor of all per-job randomness.
inline std::uint64_t stable_mix(std::uint64_t acc, std::uint64_t part) {
    return splitmix64(acc ^ splitmix64(part));
}

// Patch placement depends on (seed, image, patch) only, so the same patch is
// reused across the whole contrast sweep.
inline std::uint64_t patch_stream(std::uint64_t master, const std::string& image, int patch_id) {
    std::uint64_t s = stable_mix(master, fnv1a64(image));
    return stable_mix(s, static_cast<std::uint64_t>(patch_id));
}

inline std::uint64_t derive_job_seed(std::uint64_t master, const std::string& image, int patch_id,
                                     double lambda_max) {
    std::uint64_t s = patch_stream(master, image, patch_id);
    return stable_mix(s, std::bit_cast<std::uint64_t>(lambda_max));
}

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw std::invalid_argument("plan: bad boolean for '" + key + "': " + v);
}

// Plan files are user configuration, so malformed numbers are usage errors
// (invalid_argument -> CLI exit 2), unlike corrupt data files mid-run.
inline int plan_int(const std::string& v, const std::string& ctx) {
    try {
        return parse_int(v, ctx);
    } catch (const std::runtime_error& e) {
        throw std::invalid_argument(e.what());
    }
}

inline double plan_double(const std::string& v, const std::string& ctx) {
    try {
        return parse_double(v, ctx);
    } catch (const std::runtime_error& e) {
        throw std::invalid_argument(e.what());
    }
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        std::size_t comma = v.find(',', start);
        if (comma == std::string::npos)
            comma = v.size();
        std::string item = v.substr(start, comma - start);
        const auto a = item.find_first_not_of(" \t");
        const auto b = item.find_last_not_of(" \t");
        if (a != std::string::npos)
            out.push_back(item.substr(a, b - a + 1));
        start = comma + 1;
    }
    return out;
}

}  // namespace detail

inline void validate_plan(const ExperimentPlan& plan) {
    if (plan.images.empty())
        throw std::invalid_argument("plan: no input images");
    if (plan.patches_per_image < 1 || plan.patch_width < 1 || plan.patch_height < 1)
        throw std::invalid_argument("plan: patch counts and extents must be >= 1");
    if (!(plan.lambda_min > 0.0))
        throw std::invalid_argument("plan: lambda_min must be > 0");
    if (plan.lambda_max_list.empty())
        throw std::invalid_argument("plan: empty lambda_max list");
    for (double lm : plan.lambda_max_list)
        if (!(lm > plan.lambda_min))
            throw std::invalid_argument("plan: every lambda_max must exceed lambda_min");
    if (plan.methods.empty())
        throw std::invalid_argument("plan: no methods");
    for (const auto& m : plan.methods)
        if (m != "ours" && m != "exact" && m != "glbp" && m != "median")
            throw std::invalid_argument("plan: unknown method '" + m + "'");
}

/**
 * Flat key = value plan format ('#' comments; 'image' may repeat; lists are
 * comma-separated). Unknown keys are rejected so typos do not silently fall
 * back to defaults. Documented in the README.
 */
inline ExperimentPlan parse_plan_file(const std::string& path) {
    std::istringstream in(read_file(path));
    ExperimentPlan plan;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.size() && line.back() == '\r')
            line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        const auto a = line.find_first_not_of(" \t");
        if (a == std::string::npos)
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto x = s.find_first_not_of(" \t");
            if (x == std::string::npos)
                return std::string();
            const auto y = s.find_last_not_of(" \t");
            return s.substr(x, y - x + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty key or value");

        const std::string ctx = path + ":" + std::to_string(lineno);
        if (key == "image") {
            plan.images.push_back(val);
        } else if (key == "patches_per_image") {
            plan.patches_per_image = detail::plan_int(val, ctx);
        } else if (key == "patch_width") {
            plan.patch_width = detail::plan_int(val, ctx);
        } else if (key == "patch_height") {
            plan.patch_height = detail::plan_int(val, ctx);
        } else if (key == "lambda_min") {
            plan.lambda_min = detail::plan_double(val, ctx);
        } else if (key == "lambda_max") {
            plan.lambda_max_list.clear();
            for (const auto& item : detail::split_list(val))
                plan.lambda_max_list.push_back(detail::plan_double(item, ctx));
        } else if (key == "methods") {
            plan.methods = detail::split_list(val);
        } else if (key == "seed") {
            std::uint64_t s = 0;
            const char* last = val.data() + val.size();
            auto [p, ec] = std::from_chars(val.data(), last, s);
            if (ec != std::errc{} || p != last)
                throw std::invalid_argument(ctx + ": bad seed '" + val + "'");
            plan.master_seed = s;
        } else if (key == "resample") {
            plan.resample = detail::parse_bool(val, key);
        } else if (key == "blur_sigma") {
            plan.blur_sigma = detail::plan_double(val, ctx);
        } else if (key == "k") {
            plan.restore.trial_count = detail::plan_int(val, ctx);
        } else if (key == "h") {
            plan.restore.h = detail::plan_double(val, ctx);
        } else if (key == "alpha0") {
            plan.restore.alpha0 = detail::plan_double(val, ctx);
        } else if (key == "xi0") {
            plan.restore.xi0 = detail::plan_double(val, ctx);
        } else if (key == "beta0") {
            plan.glbp_beta0 = detail::plan_double(val, ctx);
        } else if (key == "lbp_tol") {
            plan.restore.lbp_tol = detail::plan_double(val, ctx);
        } else if (key == "lbp_max_sweeps") {
            plan.restore.lbp_max_sweeps = detail::plan_int(val, ctx);
        } else if (key == "em_tol") {
            plan.restore.em_tol = detail::plan_double(val, ctx);
        } else if (key == "em_max_iters") {
            plan.restore.em_max_iter = detail::plan_int(val, ctx);
        } else if (key == "damping") {
            plan.restore.damping = detail::plan_double(val, ctx);
        } else if (key == "mean_field") {
            plan.restore.mean_field = detail::parse_bool(val, key);
        } else {
            throw std::invalid_argument(ctx + ": unknown key '" + key + "'");
        }
    }
    validate_plan(plan);
    return plan;
}

struct ExperimentOutcome {
    std::vector<EvalRecord> records;
    std::vector<std::string> failures;
};

inline GlbpConfig glbp_config_from(const ExperimentPlan& plan) {
    GlbpConfig cfg;
    cfg.alpha0 = plan.restore.alpha0;
    cfg.beta0 = plan.glbp_beta0;
    cfg.h = plan.restore.h;
    cfg.lbp_tol = plan.restore.lbp_tol;
    cfg.lbp_max_sweeps = plan.restore.lbp_max_sweeps;
    cfg.em_tol = plan.restore.em_tol;
    cfg.em_max_iter = plan.restore.em_max_iter;
    cfg.damping = plan.restore.damping;
    cfg.mean_field = plan.restore.mean_field;
    return cfg;
}

/**
 * Full evaluation protocol: (optional) half-size resample, deterministic patch
 * placement, contrast scaling to [lambda_min, lambda_max], Poisson corruption
 * with a per-job seed, restoration with every requested method, PSNR/ISNR
 * against the ground-truth field. Jobs are independent and may run on a
 * worker pool; records come back in job order regardless of thread count.
 * Per-job errors are recorded and the remaining jobs continue.
 */
inline ExperimentOutcome run_experiment(const ExperimentPlan& plan, int jobs = 1) {
    validate_plan(plan);
    if (jobs < 1)
        throw std::invalid_argument("run_experiment: jobs must be >= 1");

    std::vector<IntensityImage> prepared;
    prepared.reserve(plan.images.size());
    for (const auto& path : plan.images) {
        IntensityImage img = read_pgm(path);
        if (plan.resample)
            img = resample_half(img, plan.blur_sigma);
        if (img.width() < plan.patch_width || img.height() < plan.patch_height)
            throw std::invalid_argument("plan: patch does not fit prepared image " + path);
        prepared.push_back(std::move(img));
    }

    struct Job {
        int image_idx;
        int patch_id;
        double lambda_max;
    };
    std::vector<Job> todo;
    for (std::size_t ii = 0; ii < plan.images.size(); ++ii)
        for (int p = 0; p < plan.patches_per_image; ++p)
            for (double lm : plan.lambda_max_list)
                todo.push_back({static_cast<int>(ii), p, lm});

    struct JobResult {
        std::vector<EvalRecord> records;
        std::string failure;  // empty on success
    };
    std::vector<JobResult> results(todo.size());

    auto run_job = [&](const Job& job, JobResult& out) {
        const std::string& image_path = plan.images[static_cast<std::size_t>(job.image_idx)];
        const IntensityImage& img = prepared[static_cast<std::size_t>(job.image_idx)];

        SplitMix64 place(patch_stream(plan.master_seed, image_path, job.patch_id));
        const int x0 = static_cast<int>(place.next() %
                                        static_cast<std::uint64_t>(img.width() - plan.patch_width + 1));
        const int y0 = static_cast<int>(place.next() %
                                        static_cast<std::uint64_t>(img.height() - plan.patch_height + 1));
        const IntensityImage patch =
            extract_patch(img, x0, y0, plan.patch_width, plan.patch_height);

        const std::uint64_t seed =
            derive_job_seed(plan.master_seed, image_path, job.patch_id, job.lambda_max);
        const SourceField truth = scale_to_source(patch, plan.lambda_min, job.lambda_max);
        const CountImage z = poisson_sample(truth, seed);

        SourceField counts_field(z.width(), z.height());
        for (std::size_t i = 0; i < z.size(); ++i)
            counts_field[i] = static_cast<double>(z[i]);
        const double psnr_corrupted = psnr(counts_field, truth);

        auto push = [&](const std::string& method, double p_db) {
            out.records.push_back({image_path, job.patch_id, seed, job.lambda_max, method, p_db,
                                   p_db - psnr_corrupted});
        };
        out.records.push_back(
            {image_path, job.patch_id, seed, job.lambda_max, "corrupted", psnr_corrupted, 0.0});

        for (const auto& method : plan.methods) {
            if (method == "ours") {
                push("ours", psnr(restore(z, plan.restore).lambda_hat, truth));
            } else if (method == "exact") {
                ExactEmConfig cfg{plan.restore.h, plan.restore.alpha0, plan.restore.xi0,
                                  plan.restore.em_tol, plan.restore.em_max_iter};
                const int trials = plan.restore.trial_count > 0 ? plan.restore.trial_count
                                                                : default_trial_count(z);
                push("exact", psnr(run_exact_em(z, trials, cfg).lambda_hat, truth));
            } else if (method == "glbp") {
                const SourceField lam = glbp_restore(z, glbp_config_from(plan)).lambda_hat;
                push("glbp", psnr(clamp_positive(lam), truth));
            } else if (method == "median") {
                push("median", psnr(median_filter_3x3(z), truth));
            }
        }
    };

    if (jobs == 1) {
        for (std::size_t j = 0; j < todo.size(); ++j) {
            try {
                run_job(todo[j], results[j]);
            } catch (const std::exception& e) {
                results[j].failure = e.what();
            }
        }
    } else {
        std::atomic<std::size_t> cursor{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t j = cursor.fetch_add(1);
                if (j >= todo.size())
                    return;
                try {
                    run_job(todo[j], results[j]);
                } catch (const std::exception& e) {
                    results[j].failure = e.what();
                }
            }
        };
        std::vector<std::thread> pool;
        const int n = std::min<int>(jobs, static_cast<int>(todo.size()));
        pool.reserve(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }

    ExperimentOutcome outcome;
    for (std::size_t j = 0; j < todo.size(); ++j) {
        if (!results[j].failure.empty()) {
            std::ostringstream msg;
            msg << plan.images[static_cast<std::size_t>(todo[j].image_idx)] << " patch "
                << todo[j].patch_id << " lambda_max " << format_double(todo[j].lambda_max) << ": "
                << results[j].failure;
            outcome.failures.push_back(msg.str());
            continue;
        }
        for (auto& r : results[j].records)
            outcome.records.push_back(std::move(r));
    }
    return outcome;
}

inline std::string metrics_to_csv(const std::vector<EvalRecord>& records) {
    std::ostringstream out;
    out << "image,patch_id,seed,lambda_max,method,psnr_db,isnr_vs_corrupted_db\n";
    for (const auto& r : records) {
        out << r.image << "," << r.patch_id << "," << r.seed << "," << format_double(r.lambda_max)
            << "," << r.method << "," << format_double(r.psnr_db) << ","
            << format_double(r.isnr_vs_corrupted_db) << "\n";
    }
    return out.str();
}

inline void write_metrics_csv(const std::string& path, const std::vector<EvalRecord>& records) {
    write_file_atomic(path, metrics_to_csv(records));
}

// Five-number summaries per (method, lambda_max) cell for both metrics,
// ready for box plots. Methods keep first-appearance order.
inline std::string boxplot_to_csv(const std::vector<EvalRecord>& records) {
    std::vector<std::string> method_order;
    std::vector<double> contrasts;
    for (const auto& r : records) {
        if (std::find(method_order.begin(), method_order.end(), r.method) == method_order.end())
            method_order.push_back(r.method);
        if (std::find(contrasts.begin(), contrasts.end(), r.lambda_max) == contrasts.end())
            contrasts.push_back(r.lambda_max);
    }
    std::sort(contrasts.begin(), contrasts.end());

    std::ostringstream out;
    out << "method,lambda_max,metric,min,q1,median,q3,max\n";
    for (const auto& method : method_order) {
        for (double lm : contrasts) {
            for (const char* metric : {"psnr_db", "isnr_vs_corrupted_db"}) {
                std::vector<double> vals;
                for (const auto& r : records)
                    if (r.method == method && r.lambda_max == lm)
                        vals.push_back(std::string(metric) == "psnr_db" ? r.psnr_db
                                                                        : r.isnr_vs_corrupted_db);
                if (vals.empty())
                    continue;
                const Quantiles q = quantiles(vals);
                out << method << "," << format_double(lm) << "," << metric << ","
                    << format_double(q.min) << "," << format_double(q.q1) << ","
                    << format_double(q.median) << "," << format_double(q.q3) << ","
                    << format_double(q.max) << "\n";
            }
        }
    }
    return out.str();
}

inline void write_boxplot_csv(const std::string& path, const std::vector<EvalRecord>& records) {
    write_file_atomic(path, boxplot_to_csv(records));
}

}  // namespace pcir
