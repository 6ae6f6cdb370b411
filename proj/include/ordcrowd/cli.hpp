#ifndef ORDCROWD_CLI_HPP
#define ORDCROWD_CLI_HPP

// Command-line driver: infer, evaluate, spam-bench and synth. run() returns
// the process exit code (0 success, 1 usage error, 2 runtime failure).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ordcrowd/baselines.hpp"
#include "ordcrowd/continuous.hpp"
#include "ordcrowd/dataset.hpp"
#include "ordcrowd/dawid_skene.hpp"
#include "ordcrowd/errors.hpp"
#include "ordcrowd/evaluation.hpp"
#include "ordcrowd/fit.hpp"
#include "ordcrowd/glad.hpp"
#include "ordcrowd/odm.hpp"
#include "ordcrowd/ord_binary.hpp"

namespace ordcrowd::cli {

using nlohmann::json;

enum class Method { odm, dawid_skene, glad, ord_binary, continuous, mean, median, majority };

inline const std::map<std::string, Method>& method_names() {
    static const std::map<std::string, Method> names = {
        {"odm", Method::odm},           {"dawid-skene", Method::dawid_skene}, {"glad", Method::glad},
        {"ord-binary", Method::ord_binary}, {"continuous", Method::continuous}, {"mean", Method::mean},
        {"median", Method::median},     {"majority", Method::majority}};
    return names;
}

inline std::optional<Method> parse_method(const std::string& name) {
    const auto& names = method_names();
    auto it = names.find(name);
    if (it == names.end()) return std::nullopt;
    return it->second;
}

inline std::string method_name(Method m) {
    for (const auto& [name, value] : method_names())
        if (value == m) return name;
    return "unknown";
}

struct OdmOptions {
    bool ordinal_link = true;
    bool spam_mixture = true;
};

struct MethodRun {
    std::vector<double> z_hat;
    json sidecar;
};

namespace detail {

inline json fit_summary(const ModelFit& f) {
    return {{"objective", f.objective},   {"iterations", f.iterations},     {"converged", f.converged},
            {"restarts_run", f.restarts_run}, {"best_restart", f.best_restart}, {"trace", f.trace}};
}

inline json per_annotator(const RatingsTable& table, const std::vector<double>& values) {
    json out = json::object();
    for (std::size_t n = 0; n < table.annotators(); ++n) out[table.annotator_id(n)] = values[n];
    return out;
}

} // namespace detail

/// Fits one method and collects its estimates and sidecar diagnostics.
inline MethodRun run_method(Method method, const RatingsTable& table, const CategoryMap& cats,
                            const OrdinalScale& scale, const FitConfig& config, const OdmOptions& odm_opt = {}) {
    MethodRun out;
    out.sidecar["method"] = method_name(method);
    switch (method) {
    case Method::odm: {
        auto h = odm::HyperParams::defaults(scale, table.annotators());
        h.use_ordinal_link = odm_opt.ordinal_link;
        h.use_spam_mixture = odm_opt.spam_mixture;
        auto r = odm::fit(table, cats, h, config);
        out.z_hat = r.fit.z_hat;
        out.sidecar.update(detail::fit_summary(r.fit));
        out.sidecar["ordinal_link"] = odm_opt.ordinal_link;
        out.sidecar["spam_mixture"] = odm_opt.spam_mixture;
        out.sidecar["restart_elbos"] = r.restart_elbos;
        out.sidecar["spamminess"] = detail::per_annotator(table, r.spamminess);
        out.sidecar["expertise"] = detail::per_annotator(table, r.expertise);
        json diff = json::object();
        for (std::size_t c = 0; c < cats.categories(); ++c) diff[cats.category_id(c)] = r.inv_difficulty[c];
        out.sidecar["inverse_difficulty"] = diff;
        out.sidecar["alpha"] = r.hypers.alpha;
        out.sidecar["beta"] = r.hypers.beta;
        break;
    }
    case Method::dawid_skene: {
        auto r = dawid_skene::fit(table, scale, config);
        out.z_hat = r.fit.z_hat;
        out.sidecar.update(detail::fit_summary(r.fit));
        out.sidecar["pi"] = r.params.pi;
        json conf = json::object();
        for (std::size_t n = 0; n < table.annotators(); ++n) conf[table.annotator_id(n)] = r.params.phi[n];
        out.sidecar["confusion"] = conf;
        break;
    }
    case Method::glad: {
        auto r = glad::fit(table, scale, config);
        out.z_hat = r.fit.z_hat;
        out.sidecar.update(detail::fit_summary(r.fit));
        out.sidecar["pi"] = r.params.pi;
        out.sidecar["expertise"] = detail::per_annotator(table, r.params.a);
        json inv = json::object();
        for (std::size_t m = 0; m < table.instances(); ++m)
            inv[table.instance_id(m)] = std::exp(r.params.log_b[m]);
        out.sidecar["inverse_difficulty"] = inv;
        break;
    }
    case Method::ord_binary: {
        auto r = ord_binary::fit(table, scale, config);
        out.z_hat = r.fit.z_hat;
        out.sidecar.update(detail::fit_summary(r.fit));
        out.sidecar["pi"] = r.params.pi;
        json sens = json::object(), spec = json::object();
        for (std::size_t n = 0; n < table.annotators(); ++n) {
            sens[table.annotator_id(n)] = r.params.sens[n];
            spec[table.annotator_id(n)] = r.params.spec[n];
        }
        out.sidecar["sensitivity"] = sens;
        out.sidecar["specificity"] = spec;
        break;
    }
    case Method::continuous: {
        FitConfig c = config;
        auto r = continuous::fit(table, scale, c);
        out.z_hat = r.fit.z_hat;
        out.sidecar.update(detail::fit_summary(r.fit));
        out.sidecar["precision"] = detail::per_annotator(table, r.params.tau);
        break;
    }
    case Method::mean:
        out.z_hat = baselines::mean_agg(table, scale);
        break;
    case Method::median:
        out.z_hat = baselines::median_agg(table, scale);
        break;
    case Method::majority:
        out.z_hat = baselines::majority_vote(table, scale);
        break;
    }
    return out;
}

struct Estimates {
    std::vector<std::string> ids;
    std::vector<double> z_hat;
};

inline void write_estimates(std::ostream& out, const std::vector<std::string>& ids, const std::vector<double>& z) {
    out << "instance\tz_hat\n" << std::setprecision(17);
    for (std::size_t m = 0; m < ids.size(); ++m) out << ids[m] << '\t' << z[m] << '\n';
}

inline Estimates read_estimates(std::istream& in) {
    static constexpr std::string_view header[] = {"instance", "z_hat"};
    Estimates est;
    ordcrowd::detail::read_tsv(in, header, [&](const auto& f, std::size_t line_no) {
        est.ids.emplace_back(f[0]);
        est.z_hat.push_back(ordcrowd::detail::parse_double(f[1], line_no));
    });
    return est;
}

/// Parses "a..b" or a comma-separated list of spam levels.
inline std::vector<std::size_t> parse_levels(const std::string& spec) {
    std::vector<std::size_t> out;
    auto to_level = [&](const std::string& s) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(s, &used);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--levels", "not a level: '" + s + "'");
        }
        if (used != s.size() || v > 9) throw CLI::ValidationError("--levels", "levels must lie in 0..9");
        return static_cast<std::size_t>(v);
    };
    if (auto dots = spec.find(".."); dots != std::string::npos) {
        const std::size_t lo = to_level(spec.substr(0, dots)), hi = to_level(spec.substr(dots + 2));
        if (lo > hi) throw CLI::ValidationError("--levels", "empty range");
        for (std::size_t l = lo; l <= hi; ++l) out.push_back(l);
        return out;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_level(item));
    if (out.empty()) throw CLI::ValidationError("--levels", "no levels given");
    return out;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

struct CommonFit {
    std::size_t restarts = 10;
    std::size_t max_iters = 1000;
    double tol = 0.1;
    std::uint64_t seed = 0;
    int scale = 5;
    std::string categories;
    std::string granularity = "single";
    bool no_ordinal_link = false;
    bool no_spam_mixture = false;

    void add_to(CLI::App& app) {
        app.add_option("--scale", scale, "number of rating levels K")->check(CLI::Range(2, 1000));
        app.add_option("--restarts", restarts, "random restarts")->check(CLI::PositiveNumber);
        app.add_option("--max-iters", max_iters, "iteration cap per restart")->check(CLI::PositiveNumber);
        app.add_option("--tol", tol, "stop when the objective moves by less than this")
            ->check(CLI::NonNegativeNumber);
        app.add_option("--seed", seed, "random seed");
        auto* cat = app.add_option("--categories", categories, "instance<TAB>category file")
                        ->check(CLI::ExistingFile);
        app.add_option("--granularity", granularity, "category granularity without a file")
            ->check(CLI::IsMember({"single", "per-instance"}))
            ->excludes(cat);
        app.add_flag("--no-ordinal-link", no_ordinal_link, "odm: treat ratings as real values");
        app.add_flag("--no-spam-mixture", no_spam_mixture, "odm: drop the spam component");
    }

    FitConfig config() const { return {restarts, max_iters, tol, seed}; }
    OdmOptions odm() const { return {!no_ordinal_link, !no_spam_mixture}; }

    CategoryMap category_map(const RatingsTable& table) const {
        if (!categories.empty()) return build_category_map(table, std::filesystem::path(categories));
        return build_category_map(table, granularity == "single" ? Granularity::single : Granularity::per_instance);
    }
};

/// Same category assignment on a table whose instances are unchanged.
inline CategoryMap remap_categories(const RatingsTable& table, const CategoryMap& cats) {
    std::vector<std::size_t> of(table.instances());
    std::vector<std::string> ids(cats.categories());
    for (std::size_t m = 0; m < of.size(); ++m) of[m] = cats.category_of(m);
    for (std::size_t c = 0; c < ids.size(); ++c) ids[c] = cats.category_id(c);
    return CategoryMap(table, std::move(of), std::move(ids));
}

inline json report_json(const evaluation::EvalReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json per = json::object();
    for (const auto& [q, v] : r.per_query_ndcg) per[q] = v;
    return {{"mse", r.mse}, {"correlation", num(r.correlation)}, {"ndcg", num(r.ndcg)},
            {"per_query_ndcg", per}, {"covered", r.covered}};
}

} // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Ground-truth inference from noisy ordinal crowd ratings", "ordcrowd"};
    app.require_subcommand(1);

    // infer
    auto* infer = app.add_subcommand("infer", "estimate real-valued ground truth from ratings");
    std::string ratings_path, method, out_path;
    detail::CommonFit infer_fit;
    infer->add_option("--ratings", ratings_path, "instance<TAB>annotator<TAB>rating file")
        ->required()
        ->check(CLI::ExistingFile);
    std::vector<std::string> method_list;
    for (const auto& [name, value] : method_names()) method_list.push_back(name);
    infer->add_option("--method", method, "inference method")->required()->check(CLI::IsMember(method_list));
    infer->add_option("--out", out_path, "estimates TSV; the JSON sidecar goes to <out>.json")->required();
    infer_fit.add_to(*infer);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score estimates against ground truth");
    std::string est_path, truth_path, queries_path, json_path, eval_label = "estimates";
    std::size_t eval_level = 0;
    eval->add_option("--estimates", est_path, "instance<TAB>z_hat file")->required()->check(CLI::ExistingFile);
    eval->add_option("--truth", truth_path, "instance<TAB>value file")->required()->check(CLI::ExistingFile);
    eval->add_option("--queries", queries_path, "instance<TAB>category file grouping instances for NDCG")
        ->check(CLI::ExistingFile);
    eval->add_option("--json", json_path, "metrics JSON path (default <estimates>.metrics.json)");
    eval->add_option("--label", eval_label, "method column of the TSV row");
    eval->add_option("--spam-level", eval_level, "spam_level column of the TSV row");

    // spam-bench
    auto* bench = app.add_subcommand("spam-bench", "sweep injected spam levels over several methods");
    std::string bench_ratings, bench_truth, bench_queries, bench_methods, bench_levels = "0..9", bench_out;
    detail::CommonFit bench_fit;
    bench->add_option("--ratings", bench_ratings)->required()->check(CLI::ExistingFile);
    bench->add_option("--truth", bench_truth)->required()->check(CLI::ExistingFile);
    bench->add_option("--queries", bench_queries, "instance<TAB>category file grouping instances for NDCG")
        ->check(CLI::ExistingFile);
    bench->add_option("--methods", bench_methods, "comma-separated method names")->required();
    bench->add_option("--levels", bench_levels, "fake ratings per instance, 'a..b' or a list");
    bench->add_option("--out", bench_out, "TSV output (default stdout)");
    bench_fit.add_to(*bench);

    // synth
    auto* synth = app.add_subcommand("synth", "sample a synthetic dataset from the generative model");
    evaluation::SynthConfig scfg;
    std::string prefix;
    double spammer_fraction = 0.0, good_eps = 0.95, spammer_eps = 0.05;
    synth->add_option("--m", scfg.instances, "instances")->check(CLI::PositiveNumber);
    synth->add_option("--n", scfg.annotators, "annotators")->check(CLI::PositiveNumber);
    synth->add_option("--k", scfg.levels, "rating levels")->check(CLI::Range(2, 1000));
    synth->add_option("--c", scfg.categories, "categories")->check(CLI::PositiveNumber);
    synth->add_option("--ratings-per-instance", scfg.ratings_per_instance)->check(CLI::PositiveNumber);
    synth->add_option("--spammer-fraction", spammer_fraction, "fraction of annotators with the low epsilon")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--epsilon", good_eps, "epsilon of regular annotators")->check(CLI::Range(0.0, 1.0));
    synth->add_option("--spammer-epsilon", spammer_eps, "epsilon of spammers")->check(CLI::Range(0.0, 1.0));
    synth->add_option("--seed", scfg.seed);
    synth->add_option("--out-prefix", prefix, "writes P.ratings.tsv, P.truth.tsv, P.categories.tsv, P.params.json")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
        return 1;
    }

    try {
        if (*infer) {
            const auto scale = OrdinalScale::standard(infer_fit.scale);
            const auto table = load_ratings(ratings_path, scale);
            const auto cats = infer_fit.category_map(table);
            auto run = run_method(*parse_method(method), table, cats, scale, infer_fit.config(), infer_fit.odm());
            run.sidecar["seed"] = infer_fit.seed;
            auto est = detail::open_output(out_path);
            write_estimates(est, table.instance_ids(), run.z_hat);
            auto side = detail::open_output(out_path + ".json");
            side << std::setprecision(17) << run.sidecar.dump(2) << '\n';
        } else if (*eval) {
            auto in = ordcrowd::detail::open_input(est_path);
            const auto est = read_estimates(in);
            const RatingsTable index(2, est.ids, {}, {});
            const auto truth = load_truth(truth_path, index);
            const auto queries = queries_path.empty() ? build_category_map(index, Granularity::single)
                                                      : build_category_map(index, std::filesystem::path(queries_path));
            const auto report = evaluation::evaluate(truth, est.z_hat, queries, est.ids);
            auto js = detail::open_output(json_path.empty() ? est_path + ".metrics.json" : json_path);
            js << detail::report_json(report).dump(2) << '\n';
            out << std::setprecision(10);
            evaluation::write_report_header(out);
            evaluation::write_report_row(out, eval_label, eval_level, report);
        } else if (*bench) {
            std::vector<Method> methods;
            std::stringstream ss(bench_methods);
            std::string item;
            while (std::getline(ss, item, ',')) {
                auto m = parse_method(item);
                if (!m) {
                    err << "usage error: unknown method '" << item << "'\n";
                    return 1;
                }
                methods.push_back(*m);
            }
            std::vector<std::size_t> levels;
            try {
                levels = parse_levels(bench_levels);
            } catch (const CLI::ValidationError& e) {
                err << "usage error: " << e.what() << '\n';
                return 1;
            }
            const auto scale = OrdinalScale::standard(bench_fit.scale);
            const auto table = load_ratings(bench_ratings, scale);
            const auto truth = load_truth(bench_truth, table);
            const auto cats = bench_fit.category_map(table);
            const auto queries = bench_queries.empty()
                                     ? build_category_map(table, Granularity::single)
                                     : build_category_map(table, std::filesystem::path(bench_queries));
            std::ofstream file;
            if (!bench_out.empty()) file = detail::open_output(bench_out);
            std::ostream& tsv = bench_out.empty() ? out : file;
            tsv << std::setprecision(10);
            evaluation::write_report_header(tsv);
            for (std::size_t level : levels) {
                const auto spammed = evaluation::inject_spam(table, {level, restart_seed(bench_fit.seed, level)});
                const auto spam_cats = detail::remap_categories(spammed, cats);
                for (Method m : methods) {
                    const auto r = run_method(m, spammed, spam_cats, scale, bench_fit.config(), bench_fit.odm());
                    const auto report = evaluation::evaluate(truth, r.z_hat, queries, table.instance_ids());
                    evaluation::write_report_row(tsv, method_name(m), level, report);
                }
            }
        } else if (*synth) {
            scfg.epsilon_groups = {{1.0 - spammer_fraction, good_eps}, {spammer_fraction, spammer_eps}};
            const auto data = evaluation::synth_generate(scfg);
            write_ratings(std::filesystem::path(prefix + ".ratings.tsv"), data.table);
            {
                auto f = detail::open_output(prefix + ".truth.tsv");
                write_truth(f, data.table, data.truth);
            }
            {
                auto f = detail::open_output(prefix + ".categories.tsv");
                write_category_map(f, data.table, data.categories);
            }
            json params;
            params["seed"] = scfg.seed;
            params["hyperparameters"] = {{"alpha", scfg.alpha}, {"beta", scfg.beta},   {"phi", scfg.phi},
                                         {"eta", scfg.eta},     {"lambda", scfg.lambda},
                                         {"mu", scfg.mu.value_or(data.scale.mean_value())}};
            params["tau"] = detail::per_annotator(data.table, data.params.tau);
            params["epsilon"] = detail::per_annotator(data.table, data.params.epsilon);
            json delta = json::object();
            for (std::size_t c = 0; c < data.categories.categories(); ++c)
                delta[data.categories.category_id(c)] = data.params.delta[c];
            params["delta"] = delta;
            auto f = detail::open_output(prefix + ".params.json");
            f << std::setprecision(17) << params.dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace ordcrowd::cli

#endif // ORDCROWD_CLI_HPP
