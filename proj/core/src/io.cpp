#include "partmi/io.hpp"

#include "partmi/errors.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace partmi {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view field, double& out) {
    field = trim(field);
    const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    return res.ec == std::errc{} && res.ptr == field.data() + field.size();
}

bool parse_long(std::string_view field, long long& out) {
    field = trim(field);
    const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    return res.ec == std::errc{} && res.ptr == field.data() + field.size();
}

bool skippable(std::string_view line) {
    line = trim(line);
    return line.empty() || line.front() == '#';
}

} // namespace

Eigen::MatrixXd read_csv_matrix(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first_content = true;
    while (std::getline(in, line)) {
        if (skippable(line)) continue;
        const auto fields = split_fields(trim(line));
        std::vector<double> row;
        row.reserve(fields.size());
        bool ok = true;
        for (const auto f : fields) {
            double v;
            if (!parse_double(f, v)) { ok = false; break; }
            row.push_back(v);
        }
        if (!ok) {
            if (first_content) { first_content = false; continue; } // header line
            throw InputError("CSV: non-numeric field in line \"" + line + "\"");
        }
        first_content = false;
        if (!rows.empty() && row.size() != rows.front().size())
            throw InputError("CSV: ragged rows (" + std::to_string(row.size()) + " vs " +
                             std::to_string(rows.front().size()) + " fields)");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InputError("CSV: no data rows");
    Eigen::MatrixXd m(long(rows.size()), long(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j)
            m(long(i), long(j)) = rows[i][j];
    return m;
}

Eigen::MatrixXd read_csv_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_csv_matrix(in);
}

MultinomialSuffStats read_contingency_csv(std::istream& in) {
    std::string line;
    std::vector<int> arities;
    while (std::getline(in, line)) {
        if (skippable(line)) continue;
        const auto fields = split_fields(trim(line));
        if (fields.empty() || trim(fields[0]) != "arities")
            throw InputError("contingency CSV must start with an \"arities,...\" header");
        for (std::size_t i = 1; i < fields.size(); ++i) {
            long long a;
            if (!parse_long(fields[i], a) || a < 2)
                throw InputError("contingency CSV: bad arity \"" + std::string(fields[i]) + "\"");
            arities.push_back(int(a));
        }
        break;
    }
    if (arities.empty()) throw InputError("contingency CSV: missing arities header");

    std::size_t cells = 1;
    for (int a : arities) cells *= std::size_t(a);
    std::vector<std::int64_t> counts(cells, 0);

    while (std::getline(in, line)) {
        if (skippable(line)) continue;
        const auto fields = split_fields(trim(line));
        if (fields.size() != arities.size() + 1)
            throw InputError("contingency CSV: expected D coordinates and a count per line");
        std::size_t idx = 0;
        for (std::size_t d = 0; d < arities.size(); ++d) {
            long long x;
            if (!parse_long(fields[d], x) || x < 0 || x >= arities[d])
                throw InputError("contingency CSV: coordinate out of range in \"" + line + "\"");
            idx = idx * std::size_t(arities[d]) + std::size_t(x);
        }
        long long c;
        if (!parse_long(fields.back(), c) || c < 0)
            throw InputError("contingency CSV: bad count in \"" + line + "\"");
        counts[idx] += c;
    }
    return MultinomialSuffStats(std::move(arities), std::move(counts));
}

MultinomialSuffStats read_contingency_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_contingency_csv(in);
}

void write_contingency_csv(std::ostream& out, const MultinomialSuffStats& stats) {
    out << "arities";
    for (int a : stats.arities) out << ',' << a;
    out << '\n';
    const int d = stats.dim();
    std::vector<int> coord(std::size_t(d), 0);
    for (std::size_t idx = 0; idx < stats.counts.size(); ++idx) {
        if (stats.counts[idx] != 0) {
            for (int e = 0; e < d; ++e) out << coord[std::size_t(e)] << ',';
            out << stats.counts[idx] << '\n';
        }
        for (int e = d - 1; e >= 0; --e) {
            if (++coord[std::size_t(e)] < stats.arities[std::size_t(e)]) break;
            coord[std::size_t(e)] = 0;
        }
    }
}

std::string format_probability(double p) {
    char buf[40];
    if (p != 0.0 && std::abs(p) < 1e-3)
        std::snprintf(buf, sizeof buf, "%.5e", p);
    else
        std::snprintf(buf, sizeof buf, "%.6g", p);
    return buf;
}

void write_posterior_csv(std::ostream& out, const PosteriorTable& table) {
    out << "partition,probability\n";
    for (std::size_t i : table.order_by_probability())
        out << table.partitions[i].str() << ',' << format_probability(table.probs[i]) << '\n';
}

std::string posterior_json(const PosteriorTable& table,
                           const std::vector<BlockKey>& relevance_queries,
                           const std::vector<BlockKey>& same_block_queries) {
    nlohmann::ordered_json doc;
    doc["dimension"] = table.d;
    doc["mode"] = table.mode == PosteriorMode::exact ? "exact" : "sampled";
    doc["support_size"] = table.size();
    if (table.mode == PosteriorMode::exact)
        doc["entropy_normalized"] = entropy_normalized(table);
    doc["map"] = table.partitions[table.map_index()].str();

    auto& entries = doc["posterior"] = nlohmann::ordered_json::array();
    for (std::size_t i : table.order_by_probability()) {
        entries.push_back({{"partition", table.partitions[i].str()},
                           {"probability", table.probs[i]}});
    }
    if (!relevance_queries.empty()) {
        auto& rel = doc["relevance"] = nlohmann::ordered_json::object();
        for (const auto& block : relevance_queries)
            rel[block.str()] = relevance(table, block);
    }
    if (!same_block_queries.empty()) {
        auto& ev = doc["same_block"] = nlohmann::ordered_json::object();
        for (const auto& subset : same_block_queries)
            ev[subset.str()] = event_probability(table, same_block(subset));
    }
    return doc.dump(2);
}

const HivDataset& hiv_dataset() {
    static const HivDataset data = [] {
        HivDataset d;
        // lower triangle as published; mirrored to a full symmetric matrix
        const double lower[6][6] = {
            {1.0, 0, 0, 0, 0, 0},
            {0.483, 1.0, 0, 0, 0, 0},
            {0.220, 0.057, 1.0, 0, 0, 0},
            {-0.040, -0.133, 0.149, 1.0, 0, 0},
            {0.253, -0.124, 0.523, 0.179, 1.0, 0},
            {-0.276, -0.314, -0.183, 0.064, 0.213, 1.0},
        };
        d.correlation.resize(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                d.correlation(i, j) = i >= j ? lower[i][j] : lower[j][i];
        d.variances.resize(6);
        d.variances << 8.8374, 0.1919, 8924231.9, 20392.4, 1952795.2, 1.378;
        d.n = 107;
        d.known_mean = false;
        return d;
    }();
    return data;
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "bayes-optim") return ModelKind::bayes_optim;
    if (name == "bayes-corr") return ModelKind::bayes_corr;
    if (name == "bic") return ModelKind::bic;
    if (name == "multinomial") return ModelKind::multinomial;
    if (name == "multinomial-bic") return ModelKind::multinomial_bic;
    if (name == "constant") return ModelKind::constant;
    throw InputError("unknown model \"" + name +
                     "\"; expected bayes-optim, bayes-corr, bic, multinomial, "
                     "multinomial-bic or constant");
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::bayes_optim: return "bayes-optim";
        case ModelKind::bayes_corr: return "bayes-corr";
        case ModelKind::bic: return "bic";
        case ModelKind::multinomial: return "multinomial";
        case ModelKind::multinomial_bic: return "multinomial-bic";
        case ModelKind::constant: return "constant";
    }
    return "?";
}

} // namespace partmi
