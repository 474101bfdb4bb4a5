// pcir: restore Poisson-corrupted images and evaluate restorations.
//
// Subcommands: corrupt, restore, evaluate, experiment. Pixel fields travel as
// headered CSV (x,y,value); PGM files are accepted for 8-bit inputs and
// written as lossy previews. Exit codes: 0 ok, 1 job/solver failure,
// 2 usage or precondition error.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcir/pcir.hpp"

namespace {

bool ends_with_pgm(const std::string& path) {
    if (path.size() < 4)
        return false;
    std::string tail = path.substr(path.size() - 4);
    for (auto& c : tail)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return tail == ".pgm";
}

pcir::CountImage load_counts(const std::string& path) {
    if (ends_with_pgm(path)) {
        const pcir::IntensityImage img = pcir::read_pgm(path);
        pcir::CountImage z(img.width(), img.height());
        for (std::size_t i = 0; i < img.size(); ++i)
            z[i] = static_cast<int>(img[i]);
        return z;
    }
    return pcir::read_count_csv(path);
}

struct CorruptArgs {
    std::string input;
    std::string out_prefix;
    double lambda_min = 2.0;
    double lambda_max = 0.0;
    std::uint64_t seed = 1;
};

void cmd_corrupt(const CorruptArgs& a) {
    const pcir::IntensityImage img = pcir::read_pgm(a.input);
    const pcir::SourceField truth = pcir::scale_to_source(img, a.lambda_min, a.lambda_max);
    const pcir::CountImage z = pcir::poisson_sample(truth, a.seed);
    pcir::write_field_csv(a.out_prefix + "_lambda.csv", truth);
    pcir::write_count_csv(a.out_prefix + "_counts.csv", z);
    pcir::write_pgm(a.out_prefix + "_counts.pgm", pcir::counts_to_gray8(z));
    std::cout << "wrote " << a.out_prefix << "_lambda.csv, " << a.out_prefix << "_counts.csv, "
              << a.out_prefix << "_counts.pgm\n";
}

struct RestoreArgs {
    std::string input;
    std::string out_prefix;
    std::string method = "ours";
    pcir::RestoreConfig cfg;
    double glbp_beta0 = 1.0;
};

std::string diag_csv_ours(const std::vector<pcir::RestoreDiagRow>& rows,
                          const std::string& method) {
    std::ostringstream out;
    out << "method,em_iter,alpha,xi_mean,lbp_sweeps,m_delta\n";
    for (const auto& r : rows)
        out << method << "," << r.em_iter << "," << pcir::format_double(r.alpha) << ","
            << pcir::format_double(r.xi_mean) << "," << r.lbp_sweeps << ","
            << pcir::format_double(r.m_delta) << "\n";
    return out.str();
}

std::string diag_csv_glbp(const std::vector<pcir::GlbpDiagRow>& rows) {
    std::ostringstream out;
    out << "method,em_iter,alpha,xi_mean,lbp_sweeps,m_delta,beta_g,beta_clamped\n";
    for (const auto& r : rows)
        out << "glbp," << r.em_iter << "," << pcir::format_double(r.alpha) << ",," << r.lbp_sweeps
            << "," << pcir::format_double(r.m_delta) << "," << pcir::format_double(r.beta) << ","
            << (r.beta_clamped ? 1 : 0) << "\n";
    return out.str();
}

void cmd_restore(const RestoreArgs& a) {
    const pcir::CountImage z = load_counts(a.input);
    pcir::SourceField lambda_hat;
    std::string diag;

    if (a.method == "ours") {
        const pcir::RestoreResult res = pcir::restore(z, a.cfg);
        lambda_hat = res.lambda_hat;
        diag = diag_csv_ours(res.diagnostics, "ours");
        if (!res.converged)
            std::cerr << "warning: EM did not converge within the iteration budget\n";
    } else if (a.method == "exact") {
        pcir::ExactEmConfig cfg{a.cfg.h, a.cfg.alpha0, a.cfg.xi0, a.cfg.em_tol,
                                a.cfg.em_max_iter};
        const int trials =
            a.cfg.trial_count > 0 ? a.cfg.trial_count : pcir::default_trial_count(z);
        const pcir::ExactEmResult res = pcir::run_exact_em(z, trials, cfg);
        lambda_hat = res.lambda_hat;
        std::ostringstream out;
        out << "iter,alpha,delta,q_value\n";
        for (const auto& r : res.trace)
            out << r.iter << "," << pcir::format_double(r.alpha) << ","
                << pcir::format_double(r.delta) << "," << pcir::format_double(r.q_value) << "\n";
        diag = out.str();
        if (!res.converged)
            std::cerr << "warning: EM did not converge within the iteration budget\n";
    } else if (a.method == "glbp") {
        pcir::GlbpConfig cfg;
        cfg.alpha0 = a.cfg.alpha0;
        cfg.beta0 = a.glbp_beta0;
        cfg.h = a.cfg.h;
        cfg.lbp_tol = a.cfg.lbp_tol;
        cfg.lbp_max_sweeps = a.cfg.lbp_max_sweeps;
        cfg.em_tol = a.cfg.em_tol;
        cfg.em_max_iter = a.cfg.em_max_iter;
        cfg.damping = a.cfg.damping;
        cfg.mean_field = a.cfg.mean_field;
        const pcir::GlbpResult res = pcir::glbp_restore(z, cfg);
        lambda_hat = res.lambda_hat;  // raw posterior mean; may contain negatives
        diag = diag_csv_glbp(res.diagnostics);
        for (const auto& r : res.diagnostics)
            if (r.beta_clamped)
                std::cerr << "warning: beta_g clamped at EM iteration " << r.em_iter << "\n";
        if (!res.converged)
            std::cerr << "warning: EM did not converge within the iteration budget\n";
    } else if (a.method == "median") {
        lambda_hat = pcir::median_filter_3x3(z);
        diag = "method,em_iter,alpha,xi_mean,lbp_sweeps,m_delta\n";
    } else {
        throw std::invalid_argument("unknown method '" + a.method + "'");
    }

    pcir::write_field_csv(a.out_prefix + "_lambda.csv", lambda_hat);
    pcir::write_file_atomic(a.out_prefix + "_diag.csv", diag);
    const double lo = pcir::min_value(lambda_hat), hi = pcir::max_value(lambda_hat);
    pcir::write_pgm(a.out_prefix + ".pgm", pcir::to_gray8(lambda_hat, lo, hi));
    std::cout << "wrote " << a.out_prefix << "_lambda.csv, " << a.out_prefix << "_diag.csv, "
              << a.out_prefix << ".pgm\n";
}

struct EvaluateArgs {
    std::string test;
    std::string ref;
    std::string baseline;
    bool clamp_positive = false;
};

void cmd_evaluate(const EvaluateArgs& a) {
    pcir::Grid<double> test = pcir::read_field_csv(a.test);
    const pcir::Grid<double> ref = pcir::read_field_csv(a.ref);
    if (a.clamp_positive)
        test = pcir::clamp_positive(test);
    std::cout << "mse," << pcir::format_double(pcir::mse(test, ref)) << "\n";
    std::cout << "psnr_db," << pcir::format_double(pcir::psnr(test, ref)) << "\n";
    if (!a.baseline.empty()) {
        const pcir::Grid<double> base = pcir::read_field_csv(a.baseline);
        std::cout << "isnr_vs_baseline_db,"
                  << pcir::format_double(pcir::isnr(base, test, ref)) << "\n";
    }
}

struct ExperimentArgs {
    std::string plan_path;
    std::string out_dir = ".";
    int jobs = 1;
};

int cmd_experiment(const ExperimentArgs& a, const pcir::ExperimentPlan& plan) {
    namespace fs = std::filesystem;
    fs::create_directories(a.out_dir);
    const pcir::ExperimentOutcome outcome = pcir::run_experiment(plan, a.jobs);
    const std::string metrics_path = (fs::path(a.out_dir) / "metrics.csv").string();
    const std::string boxplot_path = (fs::path(a.out_dir) / "boxplot.csv").string();
    pcir::write_metrics_csv(metrics_path, outcome.records);
    pcir::write_boxplot_csv(boxplot_path, outcome.records);
    std::cout << "wrote " << metrics_path << " (" << outcome.records.size() << " records), "
              << boxplot_path << "\n";
    if (!outcome.failures.empty()) {
        for (const auto& f : outcome.failures)
            std::cerr << "job failed: " << f << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Poisson-corrupted image restoration"};
    app.require_subcommand(1);
    // Long-form help only: the short -h would collide with the --h ridge knob.
    app.set_help_flag("--help", "Print help and exit");

    // Shared restoration knobs; attached to the subcommands that use them.
    pcir::RestoreConfig cfg;
    double glbp_beta0 = 1.0;
    auto add_restore_flags = [&](CLI::App* cmd) {
        cmd->set_help_flag("--help", "Print help and exit");
        cmd->add_option("--k", cfg.trial_count, "Trial count K (0 = max(256, 2 max z))");
        cmd->add_option("--h", cfg.h, "Ridge hyperparameter")->capture_default_str();
        cmd->add_option("--alpha0", cfg.alpha0, "Initial smoothness alpha")->capture_default_str();
        cmd->add_option("--xi0", cfg.xi0, "Initial bound anchor xi")->capture_default_str();
        cmd->add_option("--beta0", glbp_beta0, "Initial channel precision (glbp)")
            ->capture_default_str();
        cmd->add_option("--lbp-tol", cfg.lbp_tol, "Message convergence tolerance")
            ->capture_default_str();
        cmd->add_option("--lbp-max-sweeps", cfg.lbp_max_sweeps, "Max message sweeps per E-step")
            ->capture_default_str();
        cmd->add_option("--em-tol", cfg.em_tol, "EM convergence tolerance on the mean")
            ->capture_default_str();
        cmd->add_option("--em-max-iters", cfg.em_max_iter, "Max EM iterations")
            ->capture_default_str();
        cmd->add_option("--damping", cfg.damping, "Message damping in [0,1)")
            ->capture_default_str();
        cmd->add_flag("--mean-field", cfg.mean_field,
                      "Drop pairwise correlations in the alpha update");
    };

    CorruptArgs ca;
    CLI::App* corrupt = app.add_subcommand("corrupt", "Scale a PGM to intensities and sample counts");
    corrupt->set_help_flag("--help", "Print help and exit");
    corrupt->add_option("input", ca.input, "Input PGM image")->required();
    corrupt->add_option("--out-prefix", ca.out_prefix, "Output path prefix")->required();
    corrupt->add_option("--lambda-min", ca.lambda_min, "Darkest intensity")->capture_default_str();
    corrupt->add_option("--lambda-max", ca.lambda_max, "Brightest intensity")->required();
    corrupt->add_option("--seed", ca.seed, "RNG seed")->capture_default_str();

    RestoreArgs ra;
    CLI::App* restore = app.add_subcommand("restore", "Restore intensities from counts");
    restore->add_option("input", ra.input, "Counts CSV (or 8-bit PGM)")->required();
    restore->add_option("--out-prefix", ra.out_prefix, "Output path prefix")->required();
    restore->add_option("--method", ra.method, "ours | exact | glbp | median")
        ->capture_default_str()
        ->check(CLI::IsMember({"ours", "exact", "glbp", "median"}));
    add_restore_flags(restore);

    EvaluateArgs ea;
    CLI::App* evaluate = app.add_subcommand("evaluate", "PSNR/MSE of a field against ground truth");
    evaluate->set_help_flag("--help", "Print help and exit");
    evaluate->add_option("--test", ea.test, "Restored field CSV")->required();
    evaluate->add_option("--ref", ea.ref, "Ground-truth field CSV")->required();
    evaluate->add_option("--baseline", ea.baseline, "Baseline field CSV for ISNR");
    evaluate->add_flag("--clamp-positive", ea.clamp_positive,
                       "Clamp test field to >= 1e-6 before metrics");

    ExperimentArgs xa;
    std::uint64_t seed_override = 0;
    double lambda_min_override = 0.0;
    std::string lambda_max_override, method_override;
    CLI::App* experiment = app.add_subcommand("experiment", "Run a full evaluation plan");
    experiment->add_option("plan", xa.plan_path, "Plan file (key = value)")->required();
    experiment->add_option("--out-dir", xa.out_dir, "Output directory")->capture_default_str();
    experiment->add_option("--jobs", xa.jobs, "Worker threads")->capture_default_str();
    CLI::Option* o_seed = experiment->add_option("--seed", seed_override, "Master seed override");
    CLI::Option* o_lmin =
        experiment->add_option("--lambda-min", lambda_min_override, "lambda_min override");
    CLI::Option* o_lmax = experiment->add_option("--lambda-max", lambda_max_override,
                                                 "Comma-separated lambda_max override");
    CLI::Option* o_method =
        experiment->add_option("--method", method_override, "Run only this method");
    add_restore_flags(experiment);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);  // --help / --version
        app.exit(e);
        return 2;
    }

    try {
        if (corrupt->parsed()) {
            cmd_corrupt(ca);
        } else if (restore->parsed()) {
            ra.cfg = cfg;
            ra.glbp_beta0 = glbp_beta0;
            cmd_restore(ra);
        } else if (evaluate->parsed()) {
            cmd_evaluate(ea);
        } else if (experiment->parsed()) {
            pcir::ExperimentPlan plan = pcir::parse_plan_file(xa.plan_path);
            // Flags beat the plan file; only apply the ones the user passed.
            auto take = [&](const char* name, auto& dst, const auto& src) {
                if (experiment->count(name) > 0)
                    dst = src;
            };
            take("--k", plan.restore.trial_count, cfg.trial_count);
            take("--h", plan.restore.h, cfg.h);
            take("--alpha0", plan.restore.alpha0, cfg.alpha0);
            take("--xi0", plan.restore.xi0, cfg.xi0);
            take("--beta0", plan.glbp_beta0, glbp_beta0);
            take("--lbp-tol", plan.restore.lbp_tol, cfg.lbp_tol);
            take("--lbp-max-sweeps", plan.restore.lbp_max_sweeps, cfg.lbp_max_sweeps);
            take("--em-tol", plan.restore.em_tol, cfg.em_tol);
            take("--em-max-iters", plan.restore.em_max_iter, cfg.em_max_iter);
            take("--damping", plan.restore.damping, cfg.damping);
            if (experiment->count("--mean-field") > 0)
                plan.restore.mean_field = cfg.mean_field;
            if (o_seed->count() > 0)
                plan.master_seed = seed_override;
            if (o_lmin->count() > 0)
                plan.lambda_min = lambda_min_override;
            if (o_lmax->count() > 0) {
                plan.lambda_max_list.clear();
                for (const auto& item : pcir::detail::split_list(lambda_max_override))
                    plan.lambda_max_list.push_back(pcir::detail::parse_double(item, "--lambda-max"));
            }
            if (o_method->count() > 0)
                plan.methods = {method_override};
            pcir::validate_plan(plan);
            return cmd_experiment(xa, plan);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
