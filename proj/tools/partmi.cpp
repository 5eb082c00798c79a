// partmi: posterior inference over patterns of mutual independence.
//
// Subcommands: exact (exhaustive posterior), sample (MCMC estimate),
// simulate (synthetic-data study), dataset (embedded data).

#include "partmi/combinatorics.hpp"
#include "partmi/diagnostics.hpp"
#include "partmi/errors.hpp"
#include "partmi/exact.hpp"
#include "partmi/io.hpp"
#include "partmi/models.hpp"
#include "partmi/sampler.hpp"
#include "partmi/synth.hpp"
#include "partmi/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

using namespace partmi;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Shared options and helpers
// ---------------------------------------------------------------------------

struct InputOpts {
    std::string input;
    std::string input_type = "data"; // data | matrix | table
    std::string dataset;
    std::string model = "bayes-corr";
    double n = 0.0;
    bool known_mean = false;
    int dim = 0; // constant scorer only
    double dirichlet = 1.0;
};

struct OutputOpts {
    std::string out_dir = ".";
    std::string format = "csv";
    int top = 10;
    std::vector<std::string> relevance;
    std::vector<std::string> same_block;
};

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void add_input_options(CLI::App* cmd, InputOpts& in, bool with_model = true) {
    cmd->add_option("--input", in.input, "input CSV file");
    cmd->add_option("--input-type", in.input_type,
                    "how to read --input: data (rows = observations), matrix "
                    "(covariance/correlation, needs --n), table (contingency)")
        ->check(CLI::IsMember({"data", "matrix", "table"}));
    cmd->add_option("--dataset", in.dataset, "embedded dataset name (hiv)");
    if (with_model)
        cmd->add_option("--model", in.model,
                        "bayes-optim | bayes-corr | bic | multinomial | multinomial-bic | constant");
    cmd->add_option("--n", in.n, "sample count behind a matrix input");
    cmd->add_flag("--known-mean", in.known_mean,
                  "treat the mean as known (degrees of freedom N instead of N-1)");
    cmd->add_option("--dim", in.dim, "dimension for the constant test scorer");
    cmd->add_option("--dirichlet", in.dirichlet,
                    "symmetric Dirichlet concentration for multinomial models");
}

void add_output_options(CLI::App* cmd, OutputOpts& out) {
    cmd->add_option("--out-dir", out.out_dir, "directory for result files (default: .)");
    cmd->add_option("--format", out.format, "posterior export format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--top", out.top, "partitions to print in the summary");
    cmd->add_option("--relevance", out.relevance,
                    "block (e.g. 4 or 356) whose relevance to report; repeatable");
    cmd->add_option("--same-block", out.same_block,
                    "subset whose same-block probability to report; repeatable");
}

BlockKey parse_block(const std::string& text, int d) {
    std::vector<int> elements;
    if (text.find(',') != std::string::npos) {
        std::size_t pos = 0;
        while (pos < text.size()) {
            const auto end = text.find(',', pos);
            const auto tok = text.substr(pos, end == std::string::npos ? text.npos : end - pos);
            elements.push_back(std::stoi(tok) - 1);
            if (end == std::string::npos) break;
            pos = end + 1;
        }
    } else {
        for (char c : text) {
            if (c < '1' || c > '9') throw InputError("bad block \"" + text + "\"");
            elements.push_back(c - '1');
        }
    }
    for (int e : elements)
        if (e < 0 || e >= d)
            throw InputError("block \"" + text + "\" does not fit dimension " + std::to_string(d));
    return BlockKey(std::move(elements));
}

struct ScorerBundle {
    std::unique_ptr<ModelScorer> scorer;
    int d = 0;
    ordered_json echo; // input description for the manifest
};

ScorerBundle build_scorer(const InputOpts& in) {
    const ModelKind kind = parse_model_kind(in.model);
    ScorerBundle out;
    out.echo["model"] = in.model;

    if (kind == ModelKind::constant) {
        const int d = in.dim > 0 ? in.dim : 6;
        out.scorer = std::make_unique<ConstantScorer>(d);
        out.d = d;
        out.echo["dim"] = d;
        return out;
    }

    if (kind == ModelKind::multinomial || kind == ModelKind::multinomial_bic) {
        if (in.input.empty() || in.input_type != "table")
            throw InputError("multinomial models need --input <csv> --input-type table");
        auto stats = read_contingency_csv_file(in.input);
        out.d = stats.dim();
        out.echo["input"] = in.input;
        out.echo["input_type"] = "table";
        out.echo["n"] = stats.n;
        if (kind == ModelKind::multinomial) {
            out.echo["dirichlet"] = in.dirichlet;
            out.scorer = std::make_unique<MultinomialMarginalScorer>(
                std::move(stats), DirichletHyper{in.dirichlet});
        } else {
            out.scorer = std::make_unique<MultinomialBicScorer>(std::move(stats));
        }
        return out;
    }

    // Gaussian models
    std::optional<GaussianSuffStats> stats;
    if (!in.dataset.empty()) {
        if (in.dataset != "hiv") throw InputError("unknown dataset \"" + in.dataset + "\"");
        const auto& hiv = hiv_dataset();
        const bool known_mean = in.known_mean ? true : hiv.known_mean;
        stats = GaussianSuffStats::from_matrix(hiv.correlation, hiv.n, known_mean, true);
        out.echo["dataset"] = "hiv";
        out.echo["n"] = hiv.n;
        out.echo["known_mean"] = known_mean;
    } else if (!in.input.empty()) {
        out.echo["input"] = in.input;
        out.echo["input_type"] = in.input_type;
        out.echo["known_mean"] = in.known_mean;
        if (in.input_type == "data") {
            const auto rows = read_csv_matrix_file(in.input);
            stats = GaussianSuffStats::from_data(rows, in.known_mean);
            out.echo["n"] = rows.rows();
        } else if (in.input_type == "matrix") {
            if (!(in.n >= 1.0)) throw InputError("matrix input needs --n <sample count>");
            const auto m = read_csv_matrix_file(in.input);
            if (m.rows() != m.cols()) throw InputError("matrix input must be square");
            bool unit_diag = true;
            for (int i = 0; i < m.rows(); ++i) unit_diag &= std::abs(m(i, i) - 1.0) <= 1e-9;
            stats = GaussianSuffStats::from_matrix(m, in.n, in.known_mean, unit_diag);
            out.echo["n"] = in.n;
            out.echo["is_correlation"] = unit_diag;
        } else {
            throw InputError("gaussian models accept --input-type data or matrix");
        }
    } else {
        throw InputError("no input: pass --dataset hiv or --input <csv>");
    }

    out.d = stats->dim();
    switch (kind) {
        case ModelKind::bayes_optim:
            out.scorer = std::make_unique<GaussianMarginalScorer>(*stats, optimize_lambda(*stats));
            break;
        case ModelKind::bayes_corr: {
            auto corr = stats->is_correlation ? *stats : stats->to_correlation();
            out.scorer = std::make_unique<GaussianMarginalScorer>(
                std::move(corr), GaussianHyper::bayes_corr(out.d));
            break;
        }
        case ModelKind::bic: {
            auto corr = stats->is_correlation ? *stats : stats->to_correlation();
            out.scorer = std::make_unique<GaussianBicScorer>(std::move(corr));
            break;
        }
        default:
            throw InputError("model/input combination not supported");
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << content;
}

ordered_json argv_echo(int argc, char** argv) {
    auto arr = ordered_json::array();
    for (int i = 1; i < argc; ++i) arr.push_back(argv[i]);
    return arr;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const ordered_json& config, const ordered_json& extras,
                    double total_seconds, double per_step_seconds) {
    ordered_json doc;
    doc["command"] = command;
    doc["version"] = std::string(kVersion);
    doc["config"] = config;
    for (const auto& [key, value] : extras.items()) doc[key] = value;
    doc["timings"] = {{"total_seconds", total_seconds}, {"per_step_seconds", per_step_seconds}};
    write_file(out_dir / (command + "_manifest.json"), doc.dump(2) + "\n");
}

void print_top(const PosteriorTable& table, int top) {
    const auto order = table.order_by_probability();
    std::printf("%-6s %-26s %s\n", "rank", "partition", "probability");
    for (std::size_t r = 0; r < std::min<std::size_t>(order.size(), std::size_t(top)); ++r)
        std::printf("#%-5zu %-26s %s\n", r + 1, table.partitions[order[r]].str().c_str(),
                    format_probability(table.probs[order[r]]).c_str());
}

// ---------------------------------------------------------------------------
// exact
// ---------------------------------------------------------------------------

struct ExactArgs {
    InputOpts in;
    OutputOpts out;
    int workers = 0;
};

int cmd_exact(const ExactArgs& args, const ordered_json& argv) {
    const auto t0 = std::chrono::steady_clock::now();
    auto bundle = build_scorer(args.in);
    if (bundle.d > 12)
        throw ResourceError("exact mode is capped at 12 variables (" +
                            to_decimal_string(bell(12)) +
                            " partitions); use the sample command instead");
    const auto table = exact_posterior(*bundle.scorer, bundle.d, args.workers);

    std::vector<BlockKey> relevance_blocks, same_blocks;
    for (const auto& text : args.out.relevance) relevance_blocks.push_back(parse_block(text, bundle.d));
    for (const auto& text : args.out.same_block) same_blocks.push_back(parse_block(text, bundle.d));

    fs::create_directories(args.out.out_dir);
    const fs::path out_dir(args.out.out_dir);
    if (args.out.format == "json") {
        write_file(out_dir / "exact_posterior.json",
                   posterior_json(table, relevance_blocks, same_blocks) + "\n");
    } else {
        std::ostringstream csv;
        write_posterior_csv(csv, table);
        write_file(out_dir / "exact_posterior.csv", csv.str());
    }

    std::printf("exact posterior over %zu partitions (D=%d, model %s)\n", table.size(), bundle.d,
                args.in.model.c_str());
    print_top(table, args.out.top);
    std::printf("entropy (normalized): %s\n", format_probability(entropy_normalized(table)).c_str());
    std::printf("MAP: %s\n", table.partitions[table.map_index()].str().c_str());
    for (std::size_t i = 0; i < relevance_blocks.size(); ++i)
        std::printf("relevance(%s) = %s\n", args.out.relevance[i].c_str(),
                    format_probability(relevance(table, relevance_blocks[i])).c_str());
    for (std::size_t i = 0; i < same_blocks.size(); ++i)
        std::printf("P(same block %s) = %s\n", args.out.same_block[i].c_str(),
                    format_probability(event_probability(table, same_block(same_blocks[i]))).c_str());

    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ordered_json config;
    config["argv"] = argv;
    config["input"] = bundle.echo;
    config["workers"] = args.workers;
    config["format"] = args.out.format;
    write_manifest(out_dir, "exact", config, {}, total, total / double(table.size()));
    return 0;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleArgs {
    InputOpts in;
    OutputOpts out;
    std::string preset = "gibbs+2wshc+pt";
    long steps = 0;       // 0: preset default
    int chains = 0;       // 0: preset default
    int m_init = 0;       // 0: preset default
    std::string ladder;   // integer or comma list
    double alpha1 = -1.0; // <0: preset default
    double alpha2 = -1.0;
    double burn_in = -1.0;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string shc_mode = "softmax";
    std::string scan_order = "fixed";
    long long cache_capacity = -1; // <0: unbounded
    bool shared_cache = false;
    bool trace = false;
};

std::vector<double> parse_ladder(const std::string& text) {
    if (text.find(',') == std::string::npos)
        return SamplerConfig::geometric_ladder(std::stoi(text));
    std::vector<double> temps;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto end = text.find(',', pos);
        temps.push_back(std::stod(text.substr(pos, end == std::string::npos ? text.npos : end - pos)));
        if (end == std::string::npos) break;
        pos = end + 1;
    }
    return temps;
}

int cmd_sample(const SampleArgs& args, const ordered_json& argv) {
    const auto t0 = std::chrono::steady_clock::now();
    auto bundle = build_scorer(args.in);

    SamplerConfig cfg = SamplerConfig::preset(args.preset);
    if (args.steps > 0) cfg.steps = args.steps;
    if (args.chains > 0) cfg.chains = args.chains;
    if (args.m_init > 0) cfg.m_init = args.m_init;
    if (!args.ladder.empty()) cfg.temperatures = parse_ladder(args.ladder);
    if (args.alpha1 >= 0.0) cfg.alpha1 = args.alpha1;
    if (args.alpha2 >= 0.0) cfg.alpha2 = args.alpha2;
    if (args.burn_in >= 0.0) cfg.burn_in_fraction = args.burn_in;
    cfg.seed = args.seed;
    cfg.workers = args.workers;
    cfg.shc_mode = args.shc_mode == "metropolized" ? ShcMode::metropolized : ShcMode::softmax;
    cfg.scan_order = args.scan_order == "random" ? ScanOrder::random : ScanOrder::fixed;
    if (args.cache_capacity >= 0) cfg.cache_capacity = std::size_t(args.cache_capacity);
    cfg.shared_cache = args.shared_cache;

    fs::create_directories(args.out.out_dir);
    const fs::path out_dir(args.out.out_dir);
    if (args.trace) {
        fs::create_directories(out_dir / "trace");
        cfg.trace_dir = (out_dir / "trace").string();
    }
    cfg.validate();

    const auto chains = run(cfg, *bundle.scorer);
    const auto est = estimate(chains);

    // convergence curve at logarithmically spaced chain lengths
    std::vector<long> checkpoints;
    for (int i = 1; i <= 12; ++i) {
        const long j = std::lround(std::pow(double(cfg.steps), double(i) / 12.0));
        if (j >= 10 && (checkpoints.empty() || j > checkpoints.back())) checkpoints.push_back(j);
    }
    if (checkpoints.empty() || checkpoints.back() != cfg.steps) checkpoints.push_back(cfg.steps);
    std::ostringstream het_csv;
    het_csv << "steps,heterogeneity\n";
    double final_het = 0.0;
    for (long j : checkpoints) {
        final_het = heterogeneity(estimate_prefix(chains, j).profile);
        het_csv << j << ',' << format_probability(final_het) << '\n';
    }
    write_file(out_dir / "sample_heterogeneity.csv", het_csv.str());

    std::vector<BlockKey> relevance_blocks, same_blocks;
    for (const auto& text : args.out.relevance) relevance_blocks.push_back(parse_block(text, bundle.d));
    for (const auto& text : args.out.same_block) same_blocks.push_back(parse_block(text, bundle.d));

    if (args.out.format == "json") {
        write_file(out_dir / "sample_estimate.json",
                   posterior_json(est.table, relevance_blocks, same_blocks) + "\n");
    } else {
        std::ostringstream csv;
        write_posterior_csv(csv, est.table);
        write_file(out_dir / "sample_estimate.csv", csv.str());
    }

    std::printf("sampled posterior estimate (D=%d, preset %s, J=%ld, C=%d, L=%d)\n", bundle.d,
                args.preset.c_str(), cfg.steps, cfg.chains, cfg.ladder_size());
    print_top(est.table, args.out.top);
    std::printf("visited support: %zu partitions\n", est.table.size());
    std::printf("between-chain heterogeneity: %s\n", format_probability(final_het).c_str());
    for (std::size_t i = 0; i < relevance_blocks.size(); ++i)
        std::printf("relevance(%s) = %s\n", args.out.relevance[i].c_str(),
                    format_probability(relevance(est.table, relevance_blocks[i])).c_str());
    for (std::size_t i = 0; i < same_blocks.size(); ++i)
        std::printf("P(same block %s) = %s\n", args.out.same_block[i].c_str(),
                    format_probability(event_probability(est.table, same_block(same_blocks[i]))).c_str());

    long swap_attempts = 0, swap_accepts = 0, failures = 0;
    long shc_proposals = 0, shc_accepts = 0;
    std::size_t hits = 0, misses = 0;
    for (const auto& s : chains.stats) {
        swap_attempts += s.swap_attempts;
        swap_accepts += s.swap_accepts;
        shc_proposals += s.shc_proposals;
        shc_accepts += s.shc_accepts;
        failures += s.scorer_failures;
        hits += s.cache_hits;
        misses += s.cache_misses;
    }
    if (swap_attempts > 0)
        std::printf("swap acceptance: %.3f\n", double(swap_accepts) / double(swap_attempts));
    if (failures > 0) std::printf("candidates dropped by scorer failures: %ld\n", failures);

    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ordered_json config;
    config["argv"] = argv;
    config["input"] = bundle.echo;
    config["preset"] = args.preset;
    config["steps"] = cfg.steps;
    config["chains"] = cfg.chains;
    config["m_init"] = cfg.m_init;
    config["temperatures"] = cfg.temperatures;
    config["alpha1"] = cfg.alpha1;
    config["alpha2"] = cfg.alpha2;
    config["burn_in_fraction"] = cfg.burn_in_fraction;
    config["seed"] = cfg.seed;
    config["shc_mode"] = args.shc_mode;
    config["scan_order"] = args.scan_order;
    config["workers"] = cfg.workers;
    config["format"] = args.out.format;
    if (cfg.cache_capacity) config["cache_capacity"] = *cfg.cache_capacity;
    config["shared_cache"] = cfg.shared_cache;

    ordered_json extras;
    extras["seed"] = cfg.seed;
    extras["counters"] = {{"swap_attempts", swap_attempts},
                          {"swap_accepts", swap_accepts},
                          {"swap_rate", swap_attempts ? double(swap_accepts) / double(swap_attempts) : 0.0},
                          {"shc_proposals", shc_proposals},
                          {"shc_accepts", shc_accepts},
                          {"shc_rate", shc_proposals ? double(shc_accepts) / double(shc_proposals) : 0.0},
                          {"scorer_failures", failures}};
    extras["cache"] = {{"hits", hits}, {"misses", misses}};
    extras["support_size"] = est.table.size();
    extras["heterogeneity"] = final_het;
    write_manifest(out_dir, "sample", config, extras, total,
                   total / double(cfg.steps * cfg.chains));
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    int dim = 6;
    std::string k_range = "1:6";
    int replicates = 50;
    long n = 300;
    std::string family = "gaussian";
    double dof = 3.0;
    std::string arities; // multinomial
    std::string model = "bayes-optim";
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out_dir = ".";
};

std::vector<int> parse_k_range(const std::string& text, int d) {
    std::vector<int> ks;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        const int lo = std::stoi(text.substr(0, colon));
        const int hi = std::stoi(text.substr(colon + 1));
        for (int k = lo; k <= hi; ++k) ks.push_back(k);
    } else {
        std::size_t pos = 0;
        while (pos < text.size()) {
            const auto end = text.find(',', pos);
            ks.push_back(std::stoi(text.substr(pos, end == std::string::npos ? text.npos : end - pos)));
            if (end == std::string::npos) break;
            pos = end + 1;
        }
    }
    for (int k : ks)
        if (k < 1 || k > d) throw InputError("block count " + std::to_string(k) + " outside 1..D");
    return ks;
}

struct ReplicateRow {
    int k = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    TruthSummary summary;
};

int cmd_simulate(const SimulateArgs& args, const ordered_json& argv) {
    const auto t0 = std::chrono::steady_clock::now();
    if (args.dim > 12)
        throw ResourceError("simulate evaluates exact posteriors and is capped at 12 variables");
    const ModelKind kind = parse_model_kind(args.model);

    Family family;
    if (args.family == "gaussian") family = Family::gaussian;
    else if (args.family == "student") family = Family::student;
    else if (args.family == "multinomial") family = Family::multinomial;
    else throw InputError("unknown family \"" + args.family + "\"");

    const bool multinomial_model =
        kind == ModelKind::multinomial || kind == ModelKind::multinomial_bic;
    if ((family == Family::multinomial) != multinomial_model)
        throw InputError("family " + args.family + " cannot be scored by model " + args.model);

    std::vector<int> arities;
    if (family == Family::multinomial) {
        if (args.arities.empty()) throw InputError("multinomial family needs --arities");
        std::size_t pos = 0;
        while (pos < args.arities.size()) {
            const auto end = args.arities.find(',', pos);
            arities.push_back(std::stoi(
                args.arities.substr(pos, end == std::string::npos ? args.arities.npos : end - pos)));
            if (end == std::string::npos) break;
            pos = end + 1;
        }
        if (int(arities.size()) == 1) arities.assign(std::size_t(args.dim), arities[0]);
        if (int(arities.size()) != args.dim) throw InputError("--arities must have length D");
    }

    const auto ks = parse_k_range(args.k_range, args.dim);
    std::vector<ReplicateRow> rows(ks.size() * std::size_t(args.replicates));

    const auto run_replicate = [&](std::size_t flat) {
        const int k = ks[flat / std::size_t(args.replicates)];
        const int rep = int(flat % std::size_t(args.replicates));
        ReplicateRow row;
        row.k = k;
        row.replicate = rep;
        row.seed = derive_seed(args.seed, std::uint64_t(k) << 32 | std::uint64_t(rep));

        SynthSpec spec;
        spec.d = args.dim;
        spec.k = k;
        spec.n = args.n;
        spec.family = family;
        spec.student_dof = args.dof;
        spec.arities = arities;
        spec.seed = row.seed;
        const auto synth = generate(spec);

        std::unique_ptr<ModelScorer> scorer;
        if (multinomial_model) {
            if (kind == ModelKind::multinomial)
                scorer = std::make_unique<MultinomialMarginalScorer>(*synth.table, DirichletHyper{});
            else
                scorer = std::make_unique<MultinomialBicScorer>(*synth.table);
        } else {
            const auto stats = GaussianSuffStats::from_data(synth.data, false);
            if (kind == ModelKind::bayes_optim)
                scorer = std::make_unique<GaussianMarginalScorer>(stats, optimize_lambda(stats));
            else if (kind == ModelKind::bayes_corr)
                scorer = std::make_unique<GaussianMarginalScorer>(
                    stats.to_correlation(), GaussianHyper::bayes_corr(args.dim));
            else if (kind == ModelKind::bic)
                scorer = std::make_unique<GaussianBicScorer>(stats.to_correlation());
            else
                throw InputError("model " + args.model + " is not usable in simulate");
        }
        const auto table = exact_posterior(*scorer, args.dim, 1);
        row.summary = summarize_truth(table, synth.truth);
        rows[flat] = row;
    };

    int workers = args.workers > 0 ? args.workers : int(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, int(rows.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) run_replicate(i);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = std::size_t(w); i < rows.size(); i += std::size_t(workers))
                        run_replicate(i);
                } catch (...) {
                    failures[std::size_t(w)] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& f : failures)
            if (f) std::rethrow_exception(f);
    }

    fs::create_directories(args.out_dir);
    const fs::path out_dir(args.out_dir);
    std::ostringstream csv;
    csv << "family,model,K,replicate,seed,p_true,rank,ratio_to_map,entropy\n";
    for (const auto& row : rows)
        csv << args.family << ',' << args.model << ',' << row.k << ',' << row.replicate << ','
            << row.seed << ',' << format_probability(row.summary.p_true) << ',' << row.summary.rank
            << ',' << format_probability(row.summary.ratio_to_map) << ','
            << format_probability(row.summary.entropy) << '\n';
    write_file(out_dir / "simulate_results.csv", csv.str());

    const auto quartiles = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const auto at = [&](double q) {
            const double idx = q * double(v.size() - 1);
            const std::size_t lo = std::size_t(idx);
            const std::size_t hi = std::min(lo + 1, v.size() - 1);
            return v[lo] + (idx - double(lo)) * (v[hi] - v[lo]);
        };
        return std::array<double, 3>{at(0.25), at(0.5), at(0.75)};
    };

    std::ostringstream summary;
    summary << "K,p_true_q25,p_true_median,p_true_q75,rank_median,ratio_median,"
               "entropy_q25,entropy_median,entropy_q75\n";
    std::printf("%-4s %-12s %-12s %-12s %-12s\n", "K", "median p", "median rank", "median ratio",
                "median entropy");
    for (int k : ks) {
        std::vector<double> p_true, rank, ratio, entropy;
        for (const auto& row : rows)
            if (row.k == k) {
                p_true.push_back(row.summary.p_true);
                rank.push_back(double(row.summary.rank));
                ratio.push_back(row.summary.ratio_to_map);
                entropy.push_back(row.summary.entropy);
            }
        const auto pq = quartiles(p_true), eq = quartiles(entropy);
        const auto rq = quartiles(rank), tq = quartiles(ratio);
        summary << k << ',' << format_probability(pq[0]) << ',' << format_probability(pq[1]) << ','
                << format_probability(pq[2]) << ',' << rq[1] << ',' << format_probability(tq[1])
                << ',' << format_probability(eq[0]) << ',' << format_probability(eq[1]) << ','
                << format_probability(eq[2]) << '\n';
        std::printf("%-4d %-12s %-12.1f %-12s %-12s\n", k, format_probability(pq[1]).c_str(), rq[1],
                    format_probability(tq[1]).c_str(), format_probability(eq[1]).c_str());
    }
    write_file(out_dir / "simulate_summary.csv", summary.str());

    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ordered_json config;
    config["argv"] = argv;
    config["dim"] = args.dim;
    config["k_range"] = args.k_range;
    config["replicates"] = args.replicates;
    config["n"] = args.n;
    config["family"] = args.family;
    if (family == Family::student) config["dof"] = args.dof;
    config["model"] = args.model;
    config["seed"] = args.seed;
    config["workers"] = args.workers;
    write_manifest(out_dir, "simulate", config, {}, total, total / double(rows.size()));
    return 0;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    int dim = 6;
    int k = 1;
    std::string truth;
    long n = 300;
    std::string family = "gaussian";
    double dof = 3.0;
    std::string arities;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

int cmd_generate(const GenerateArgs& args, const ordered_json& argv) {
    const auto t0 = std::chrono::steady_clock::now();
    SynthSpec spec;
    spec.d = args.dim;
    spec.k = args.k;
    if (!args.truth.empty()) spec.truth = parse_partition(args.truth, args.dim);
    spec.n = args.n;
    spec.student_dof = args.dof;
    spec.seed = args.seed;
    if (args.family == "gaussian") spec.family = Family::gaussian;
    else if (args.family == "student") spec.family = Family::student;
    else if (args.family == "multinomial") spec.family = Family::multinomial;
    else throw InputError("unknown family \"" + args.family + "\"");
    if (spec.family == Family::multinomial) {
        if (args.arities.empty()) throw InputError("multinomial family needs --arities");
        std::size_t pos = 0;
        while (pos < args.arities.size()) {
            const auto end = args.arities.find(',', pos);
            spec.arities.push_back(std::stoi(
                args.arities.substr(pos, end == std::string::npos ? args.arities.npos : end - pos)));
            if (end == std::string::npos) break;
            pos = end + 1;
        }
        if (spec.arities.size() == 1) spec.arities.assign(std::size_t(args.dim), spec.arities[0]);
    }

    const auto result = generate(spec);
    fs::create_directories(args.out_dir);
    const fs::path out_dir(args.out_dir);

    if (result.table) {
        std::ostringstream csv;
        write_contingency_csv(csv, *result.table);
        write_file(out_dir / "generate_table.csv", csv.str());
    } else {
        std::ostringstream csv;
        for (long i = 0; i < result.data.rows(); ++i) {
            for (long j = 0; j < result.data.cols(); ++j)
                csv << (j ? "," : "") << fmt_double(result.data(i, j));
            csv << '\n';
        }
        write_file(out_dir / "generate_data.csv", csv.str());
    }

    std::printf("generated %ld observations, D=%d, truth %s\n", args.n, args.dim,
                result.truth.str().c_str());

    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ordered_json config;
    config["argv"] = argv;
    config["dim"] = args.dim;
    config["n"] = args.n;
    config["family"] = args.family;
    if (spec.family == Family::student) config["dof"] = args.dof;
    if (!spec.arities.empty()) config["arities"] = spec.arities;
    config["seed"] = args.seed;
    ordered_json extras;
    extras["truth"] = result.truth.str();
    auto sigmas = ordered_json::array();
    for (const auto& sigma : result.block_sigmas) {
        auto rows = ordered_json::array();
        for (int i = 0; i < sigma.rows(); ++i) {
            auto row = ordered_json::array();
            for (int j = 0; j < sigma.cols(); ++j) row.push_back(sigma(i, j));
            rows.push_back(row);
        }
        sigmas.push_back(rows);
    }
    extras["block_sigmas"] = sigmas;
    write_manifest(out_dir, "generate", config, extras, total, total);
    return 0;
}

// ---------------------------------------------------------------------------
// compare: repeated runs per preset, pairwise run distances (between- and
// within-preset variability) and per-run convergence curves
// ---------------------------------------------------------------------------

struct CompareArgs {
    InputOpts in;
    std::string presets = "gibbs,gibbs+pt,gibbs+2wshc+pt";
    int repeats = 3;
    long steps = 10000;
    int chains = 0;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out_dir = ".";
};

int cmd_compare(const CompareArgs& args, const ordered_json& argv) {
    const auto t0 = std::chrono::steady_clock::now();
    auto bundle = build_scorer(args.in);

    std::vector<std::string> presets;
    std::size_t pos = 0;
    while (pos < args.presets.size()) {
        const auto end = args.presets.find(',', pos);
        presets.push_back(
            args.presets.substr(pos, end == std::string::npos ? args.presets.npos : end - pos));
        if (end == std::string::npos) break;
        pos = end + 1;
    }
    if (presets.empty() || args.repeats < 1) throw InputError("nothing to compare");

    struct Run {
        std::string label;
        PosteriorTable table;
        std::vector<std::pair<long, double>> het_curve;
    };
    std::vector<Run> runs;
    for (const auto& preset : presets) {
        for (int rep = 0; rep < args.repeats; ++rep) {
            SamplerConfig cfg = SamplerConfig::preset(preset);
            cfg.steps = args.steps;
            if (args.chains > 0) cfg.chains = args.chains;
            cfg.workers = args.workers;
            cfg.seed = derive_seed(args.seed, (std::uint64_t(runs.size()) << 8) | 1u);
            const auto chains = run(cfg, *bundle.scorer);
            Run r;
            r.label = preset + "#" + std::to_string(rep);
            for (int i = 1; i <= 10; ++i) {
                const long j = std::lround(std::pow(double(cfg.steps), double(i) / 10.0));
                if (j < 10 || (!r.het_curve.empty() && j <= r.het_curve.back().first)) continue;
                r.het_curve.emplace_back(j, heterogeneity(estimate_prefix(chains, j).profile));
            }
            r.table = estimate(chains).table;
            runs.push_back(std::move(r));
        }
    }

    fs::create_directories(args.out_dir);
    const fs::path out_dir(args.out_dir);

    // full pairwise distance matrix
    std::ostringstream matrix;
    matrix << "run";
    for (const auto& r : runs) matrix << ',' << r.label;
    matrix << '\n';
    std::vector<std::vector<double>> dist(runs.size(), std::vector<double>(runs.size(), 0.0));
    for (std::size_t i = 0; i < runs.size(); ++i) {
        matrix << runs[i].label;
        for (std::size_t j = 0; j < runs.size(); ++j) {
            if (j > i) dist[i][j] = dist[j][i] = run_distance(runs[i].table, runs[j].table);
            matrix << ',' << format_probability(dist[i][j]);
        }
        matrix << '\n';
    }
    write_file(out_dir / "compare_distances.csv", matrix.str());

    // per preset pair: mean and standard deviation over run pairs
    std::ostringstream summary;
    summary << "preset_a,preset_b,mean_distance,sd_distance,pairs\n";
    std::printf("%-18s %-18s %-12s %-10s\n", "preset a", "preset b", "mean L1", "sd");
    for (std::size_t a = 0; a < presets.size(); ++a) {
        for (std::size_t b = a; b < presets.size(); ++b) {
            std::vector<double> values;
            for (std::size_t i = 0; i < runs.size(); ++i)
                for (std::size_t j = (a == b ? i + 1 : 0); j < runs.size(); ++j) {
                    if (runs[i].label.rfind(presets[a] + "#", 0) != 0) continue;
                    if (runs[j].label.rfind(presets[b] + "#", 0) != 0) continue;
                    if (a == b && i >= j) continue;
                    values.push_back(dist[i][j]);
                }
            if (values.empty()) continue;
            double mean = 0.0;
            for (double d : values) mean += d;
            mean /= double(values.size());
            double var = 0.0;
            for (double d : values) var += (d - mean) * (d - mean);
            const double sd = values.size() > 1 ? std::sqrt(var / double(values.size() - 1)) : 0.0;
            summary << presets[a] << ',' << presets[b] << ',' << format_probability(mean) << ','
                    << format_probability(sd) << ',' << values.size() << '\n';
            std::printf("%-18s %-18s %-12s %-10s\n", presets[a].c_str(), presets[b].c_str(),
                        format_probability(mean).c_str(), format_probability(sd).c_str());
        }
    }
    write_file(out_dir / "compare_summary.csv", summary.str());

    // heterogeneity curves per run, one JSON report
    ordered_json curves;
    for (const auto& r : runs) {
        auto arr = ordered_json::array();
        for (const auto& [j, het] : r.het_curve) arr.push_back({{"steps", j}, {"heterogeneity", het}});
        curves[r.label] = arr;
    }
    write_file(out_dir / "compare_heterogeneity.json", curves.dump(2) + "\n");

    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ordered_json config;
    config["argv"] = argv;
    config["input"] = bundle.echo;
    config["presets"] = presets;
    config["repeats"] = args.repeats;
    config["steps"] = args.steps;
    config["seed"] = args.seed;
    write_manifest(out_dir, "compare", config, {}, total, total / double(runs.size()));
    return 0;
}

// ---------------------------------------------------------------------------
// dataset
// ---------------------------------------------------------------------------

int cmd_dataset(const std::string& name, const std::string& out_dir_opt, const std::string& format,
                const ordered_json& argv) {
    const auto t0 = std::chrono::steady_clock::now();
    if (name != "hiv") throw InputError("unknown dataset \"" + name + "\"");
    const auto& hiv = hiv_dataset();

    if (format == "json") {
        ordered_json doc;
        doc["dataset"] = "hiv";
        doc["n"] = hiv.n;
        doc["known_mean"] = hiv.known_mean;
        auto vars = ordered_json::array();
        for (int i = 0; i < hiv.variances.size(); ++i) vars.push_back(hiv.variances(i));
        doc["variances"] = vars;
        auto corr = ordered_json::array();
        for (int i = 0; i < hiv.correlation.rows(); ++i) {
            auto row = ordered_json::array();
            for (int j = 0; j < hiv.correlation.cols(); ++j) row.push_back(hiv.correlation(i, j));
            corr.push_back(row);
        }
        doc["correlation"] = corr;
        std::printf("%s\n", doc.dump(2).c_str());
    } else {
        std::printf("dataset: hiv\nn: %d\nknown_mean: %s\nvariances: ", hiv.n,
                    hiv.known_mean ? "true" : "false");
        for (int i = 0; i < hiv.variances.size(); ++i)
            std::printf("%s%s", i ? "," : "", fmt_double(hiv.variances(i)).c_str());
        std::printf("\ncorrelation:\n");
        for (int i = 0; i < hiv.correlation.rows(); ++i) {
            for (int j = 0; j < hiv.correlation.cols(); ++j)
                std::printf("%s%s", j ? "," : "", fmt_double(hiv.correlation(i, j)).c_str());
            std::printf("\n");
        }
    }

    if (!out_dir_opt.empty()) {
        fs::create_directories(out_dir_opt);
        const double total =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ordered_json config;
        config["argv"] = argv;
        config["dataset"] = name;
        config["format"] = format;
        write_manifest(out_dir_opt, "dataset", config, {}, total, total);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian search over patterns of mutual independence"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    ExactArgs exact_args;
    auto* exact_cmd = app.add_subcommand(
        "exact", "exhaustive posterior over all partitions (D <= 12)");
    add_input_options(exact_cmd, exact_args.in);
    add_output_options(exact_cmd, exact_args.out);
    exact_cmd->add_option("--workers", exact_args.workers, "score loop threads (0 = all cores)");

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "MCMC posterior estimate");
    add_input_options(sample_cmd, sample_args.in);
    add_output_options(sample_cmd, sample_args.out);
    sample_cmd->add_option("--preset", sample_args.preset,
                           "gibbs | 2wshc | gibbs+2wshc | gibbs+pt | 2wshc+pt | gibbs+2wshc+pt");
    sample_cmd->add_option("--steps", sample_args.steps, "samples per chain J");
    sample_cmd->add_option("--chains", sample_args.chains, "independent chains C");
    sample_cmd->add_option("--m-init", sample_args.m_init, "uniform pool size M for resampling");
    sample_cmd->add_option("--ladder", sample_args.ladder,
                           "tempering ladder: rung count (geometric to 32) or comma list");
    sample_cmd->add_option("--alpha1", sample_args.alpha1, "swap step probability");
    sample_cmd->add_option("--alpha2", sample_args.alpha2, "Gibbs step probability");
    sample_cmd->add_option("--burn-in", sample_args.burn_in, "burn-in fraction (default 0.5)");
    sample_cmd->add_option("--seed", sample_args.seed, "RNG seed");
    sample_cmd->add_option("--workers", sample_args.workers, "chain threads (0 = all cores)");
    sample_cmd->add_option("--shc-mode", sample_args.shc_mode, "softmax | metropolized")
        ->check(CLI::IsMember({"softmax", "metropolized"}));
    sample_cmd->add_option("--scan-order", sample_args.scan_order, "fixed | random")
        ->check(CLI::IsMember({"fixed", "random"}));
    sample_cmd->add_option("--cache-capacity", sample_args.cache_capacity,
                           "block score cache bound (0 disables, unset = unbounded)");
    sample_cmd->add_flag("--shared-cache", sample_args.shared_cache,
                         "share one score cache across chains");
    sample_cmd->add_flag("--trace", sample_args.trace, "write per-step RGS traces");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "synthetic-data recovery study");
    sim_cmd->add_option("--dim", sim_args.dim, "number of variables D");
    sim_cmd->add_option("--k-range", sim_args.k_range, "true block counts, e.g. 1:6 or 2,4");
    sim_cmd->add_option("--replicates", sim_args.replicates, "replicates per K");
    sim_cmd->add_option("--n", sim_args.n, "observations per replicate");
    sim_cmd->add_option("--family", sim_args.family, "gaussian | student | multinomial");
    sim_cmd->add_option("--dof", sim_args.dof, "Student tail index");
    sim_cmd->add_option("--arities", sim_args.arities, "multinomial arities (one value or a list)");
    sim_cmd->add_option("--model", sim_args.model, "scorer used for recovery");
    sim_cmd->add_option("--seed", sim_args.seed, "RNG seed");
    sim_cmd->add_option("--workers", sim_args.workers, "replicate threads (0 = all cores)");
    sim_cmd->add_option("--out-dir", sim_args.out_dir, "directory for result files");

    GenerateArgs gen_args;
    auto* gen_cmd = app.add_subcommand("generate", "write a synthetic dataset");
    gen_cmd->add_option("--dim", gen_args.dim, "number of variables D");
    gen_cmd->add_option("--k", gen_args.k, "true block count (uniform truth draw)");
    gen_cmd->add_option("--truth", gen_args.truth, "explicit truth partition, e.g. 12|356|4");
    gen_cmd->add_option("--n", gen_args.n, "observations");
    gen_cmd->add_option("--family", gen_args.family, "gaussian | student | multinomial");
    gen_cmd->add_option("--dof", gen_args.dof, "Student tail index");
    gen_cmd->add_option("--arities", gen_args.arities, "multinomial arities");
    gen_cmd->add_option("--seed", gen_args.seed, "RNG seed");
    gen_cmd->add_option("--out-dir", gen_args.out_dir, "directory for data and manifest");

    CompareArgs cmp_args;
    auto* cmp_cmd = app.add_subcommand(
        "compare", "repeat sampling runs per preset and report run-to-run distances");
    add_input_options(cmp_cmd, cmp_args.in);
    cmp_cmd->add_option("--presets", cmp_args.presets, "comma list of presets");
    cmp_cmd->add_option("--repeats", cmp_args.repeats, "runs per preset");
    cmp_cmd->add_option("--steps", cmp_args.steps, "samples per chain J");
    cmp_cmd->add_option("--chains", cmp_args.chains, "independent chains C");
    cmp_cmd->add_option("--seed", cmp_args.seed, "base RNG seed");
    cmp_cmd->add_option("--workers", cmp_args.workers, "chain threads");
    cmp_cmd->add_option("--out-dir", cmp_args.out_dir, "directory for reports");

    std::string dataset_name = "hiv", dataset_out, dataset_format = "csv";
    auto* dataset_cmd = app.add_subcommand("dataset", "print an embedded dataset");
    dataset_cmd->add_option("name", dataset_name, "dataset name (hiv)");
    dataset_cmd->add_option("--out-dir", dataset_out, "also write a run manifest there");
    dataset_cmd->add_option("--format", dataset_format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
        const auto echo = argv_echo(argc, argv);
        if (exact_cmd->parsed()) return cmd_exact(exact_args, echo);
        if (sample_cmd->parsed()) return cmd_sample(sample_args, echo);
        if (sim_cmd->parsed()) return cmd_simulate(sim_args, echo);
        if (gen_cmd->parsed()) return cmd_generate(gen_args, echo);
        if (cmp_cmd->parsed()) return cmd_compare(cmp_args, echo);
        if (dataset_cmd->parsed())
            return cmd_dataset(dataset_name, dataset_out, dataset_format, echo);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const ResourceError& e) {
        std::fprintf(stderr, "resource guard: %s\n", e.what());
        return 3;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
