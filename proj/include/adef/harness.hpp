#pragma once

// Experiment runner: attack campaigns over a dataset with the reporting
// conventions used throughout — success rates over correctly classified
// inputs only, norm/iteration averages over successful attacks only, and a
// histogram of total deformation sizes.
//
// Reports serialize to JSON (insertion-ordered keys, shortest-round-trip
// doubles) plus a CSV mirror; identical runs produce byte-identical files.

#include "adef/attack.hpp"
#include "adef/io.hpp"
#include "adef/nn/mnist.hpp"
#include "adef/nn/train.hpp"
#include "adef/pgd.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace adef::harness {

using json = nlohmann::ordered_json;

// Distribution of final deformation sizes across attacked images, with the
// success threshold marked. Out-of-range norms land in the last bin.
struct Histogram {
    double lo = 0.0;
    double hi = 6.0;
    double epsilon_marker = 3.0;
    std::vector<int> counts = std::vector<int>(60, 0);

    void add(double value) {
        const int nbins = static_cast<int>(counts.size());
        int bin = static_cast<int>((value - lo) / (hi - lo) * nbins);
        bin = std::clamp(bin, 0, nbins - 1);
        ++counts[static_cast<std::size_t>(bin)];
    }

    int total() const {
        int n = 0;
        for (int c : counts) n += c;
        return n;
    }
};

// One attacked image, in dataset order.
struct ImageRecord {
    Eigen::Index index = 0;  // position in the dataset
    int label = -1;
    int final_label = -1;
    AttackStatus status = AttackStatus::failed_max_iters;
    double t_norm = 0.0;
    double linf = 0.0;
    int iterations = 0;
    bool overshot = false;
    std::optional<int> target;  // targeted campaigns only
};

struct ExperimentReport {
    std::string model_id;
    AdefConfig config;
    Eigen::Index n_evaluated = 0;  // images used for the accuracy figure
    double accuracy = 0.0;
    int n_attacked = 0;     // correctly classified images attacked
    int n_success = 0;
    int n_failed_norm = 0;
    int n_failed_max_iters = 0;
    double success_rate = 0.0;  // n_success / n_attacked
    double avg_t_norm = 0.0;    // averages over successful attacks only
    double avg_linf = 0.0;
    double avg_iterations = 0.0;
    Histogram histogram;
    std::vector<ImageRecord> images;
};

struct SweepRow {
    double sigma = 0.0;
    int n_attacked = 0;
    double success_rate = 0.0;
    double avg_t_norm = 0.0;
    double avg_linf = 0.0;
    double avg_iterations = 0.0;
};

struct SweepReport {
    std::string model_id;
    std::vector<SweepRow> rows;  // keyed by distinct sigma values
};

struct DefenseCell {
    std::string model_id;
    double accuracy = 0.0;
    double pgd_success = 0.0;
    double adef_success = 0.0;
    int n_attacked_pgd = 0;
    int n_attacked_adef = 0;
};

struct DefenseMatrix {
    std::vector<DefenseCell> cells;
};

namespace detail {

// Indices of the first `limit` images the model classifies correctly
// (dataset order; limit <= 0 means all).
inline std::vector<Eigen::Index> correctly_classified(const nn::Network& net,
                                                      const nn::Dataset& data,
                                                      int limit) {
    std::vector<Eigen::Index> picked;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        if (limit > 0 && static_cast<int>(picked.size()) >= limit) break;
        if (net.classify(data.image(i)) == data.labels[static_cast<std::size_t>(i)])
            picked.push_back(i);
    }
    return picked;
}

inline void finalize_averages(ExperimentReport& rep) {
    if (rep.n_attacked > 0)
        rep.success_rate = static_cast<double>(rep.n_success) / rep.n_attacked;
    if (rep.n_success > 0) {
        rep.avg_t_norm /= rep.n_success;
        rep.avg_linf /= rep.n_success;
        rep.avg_iterations /= rep.n_success;
    }
}

}  // namespace detail

// Attacks the first `limit` correctly classified images of `data` (limit <= 0:
// all of them). Accuracy is measured over the whole dataset. `subset`, when
// given, pins the attacked indices (used by the sweep to share its subset).
// `target_rank` >= 2 aims each attack at the label with the rank-th highest
// clean logit of that image (rank 1 is the prediction itself, so it is
// rejected); it overrides any fixed cfg.target.
inline ExperimentReport run_attack_campaign(
    const nn::Network& net, const nn::Dataset& data, const AdefConfig& cfg, int limit,
    const std::string& model_id = "model",
    const std::vector<Eigen::Index>* subset = nullptr, int target_rank = 0) {
    if (data.size() == 0) throw std::invalid_argument("campaign: empty dataset");
    if (target_rank == 1)
        throw std::invalid_argument("campaign: target rank 1 is the prediction itself");
    ExperimentReport rep;
    rep.model_id = model_id;
    rep.config = cfg;
    rep.n_evaluated = data.size();
    rep.accuracy = nn::accuracy(net, data);

    const std::vector<Eigen::Index> picked =
        subset ? *subset : detail::correctly_classified(net, data, limit);

    for (const Eigen::Index i : picked) {
        const Image x = data.image(i);
        const int label = data.labels[static_cast<std::size_t>(i)];
        AdefConfig image_cfg = cfg;
        if (target_rank >= 2)
            image_cfg.target = label_of_rank(net.logits(x), target_rank);
        // Aiming at an image's own label is meaningless: a fixed-target
        // campaign skips such images, and rank >= 2 only resolves to the
        // true label when the clean prediction is already wrong.
        if (image_cfg.target && *image_cfg.target == label) continue;
        const AttackResult r = attack(net, x, label, image_cfg);
        if (r.status == AttackStatus::already_misclassified) continue;  // caption convention

        ImageRecord rec;
        rec.index = i;
        rec.label = label;
        rec.final_label = r.final_label;
        rec.status = r.status;
        rec.t_norm = r.norm;
        rec.linf = r.linf;
        rec.iterations = r.iterations;
        rec.overshot = r.overshot;
        rec.target = image_cfg.target;
        rep.images.push_back(rec);

        ++rep.n_attacked;
        rep.histogram.add(r.norm);
        switch (r.status) {
            case AttackStatus::success:
                ++rep.n_success;
                rep.avg_t_norm += r.norm;
                rep.avg_linf += r.linf;
                rep.avg_iterations += r.iterations;
                break;
            case AttackStatus::failed_norm: ++rep.n_failed_norm; break;
            default: ++rep.n_failed_max_iters; break;
        }
    }
    detail::finalize_averages(rep);
    return rep;
}

// One campaign per sigma over a shared image subset, so the rows differ only
// in the smoothing width.
inline SweepReport run_sigma_sweep(const nn::Network& net, const nn::Dataset& data,
                                   const std::vector<double>& sigmas, int limit,
                                   const AdefConfig& base_cfg = {},
                                   const std::string& model_id = "model") {
    if (sigmas.empty()) throw std::invalid_argument("sweep: no sigma values");
    SweepReport sweep;
    sweep.model_id = model_id;
    const std::vector<Eigen::Index> subset =
        detail::correctly_classified(net, data, limit);
    for (const double sigma : sigmas) {
        AdefConfig cfg = base_cfg;
        cfg.sigma = sigma;
        const ExperimentReport rep =
            run_attack_campaign(net, data, cfg, limit, model_id, &subset);
        SweepRow row;
        row.sigma = sigma;
        row.n_attacked = rep.n_attacked;
        row.success_rate = rep.success_rate;
        row.avg_t_norm = rep.avg_t_norm;
        row.avg_linf = rep.avg_linf;
        row.avg_iterations = rep.avg_iterations;
        sweep.rows.push_back(row);
    }
    return sweep;
}

// Accuracy plus PGD and deformation attack success rates for each model,
// evaluated with the standard configurations on the first `limit` correctly
// classified images per model.
inline DefenseMatrix run_defense_matrix(
    const std::vector<std::pair<std::string, const nn::Network*>>& models,
    const nn::Dataset& data, int limit, const PgdConfig& pgd_cfg = {},
    const AdefConfig& adef_cfg = {}) {
    DefenseMatrix matrix;
    for (const auto& [id, net] : models) {
        DefenseCell cell;
        cell.model_id = id;
        cell.accuracy = nn::accuracy(*net, data);
        const std::vector<Eigen::Index> picked =
            detail::correctly_classified(*net, data, limit);
        int pgd_flips = 0;
        for (const Eigen::Index i : picked) {
            const Image x = data.image(i);
            const int label = data.labels[static_cast<std::size_t>(i)];
            const PgdResult r = pgd_attack(*net, x, label, pgd_cfg);
            ++cell.n_attacked_pgd;
            if (r.success) ++pgd_flips;
        }
        const ExperimentReport adef_rep =
            run_attack_campaign(*net, data, adef_cfg, limit, id, &picked);
        cell.n_attacked_adef = adef_rep.n_attacked;
        cell.adef_success = adef_rep.success_rate;
        if (cell.n_attacked_pgd > 0)
            cell.pgd_success = static_cast<double>(pgd_flips) / cell.n_attacked_pgd;
        matrix.cells.push_back(cell);
    }
    return matrix;
}

// --- serialization -----------------------------------------------------------

inline json to_json(const AdefConfig& cfg) {
    json j;
    j["epsilon"] = cfg.epsilon;
    j["sigma"] = cfg.sigma;
    j["max_iterations"] = cfg.max_iterations;
    j["candidate_count"] = cfg.candidate_count;
    j["overshoot"] = cfg.overshoot;
    j["boundary_tol"] = cfg.boundary_tol;
    if (cfg.target) j["target"] = *cfg.target;
    return j;
}

inline json to_json(const Histogram& h) {
    json j;
    j["lo"] = h.lo;
    j["hi"] = h.hi;
    j["bins"] = h.counts.size();
    j["epsilon_marker"] = h.epsilon_marker;
    j["counts"] = h.counts;
    return j;
}

inline json to_json(const ImageRecord& rec) {
    json j;
    j["index"] = rec.index;
    j["label"] = rec.label;
    j["final_label"] = rec.final_label;
    j["status"] = to_string(rec.status);
    j["t_norm"] = rec.t_norm;
    j["linf"] = rec.linf;
    j["iterations"] = rec.iterations;
    j["overshot"] = rec.overshot;
    if (rec.target) j["target"] = *rec.target;
    return j;
}

inline json to_json(const ExperimentReport& rep) {
    json j;
    j["model"] = rep.model_id;
    j["config"] = to_json(rep.config);
    j["n_evaluated"] = rep.n_evaluated;
    j["accuracy"] = rep.accuracy;
    j["n_attacked"] = rep.n_attacked;
    j["n_success"] = rep.n_success;
    j["n_failed_norm"] = rep.n_failed_norm;
    j["n_failed_max_iters"] = rep.n_failed_max_iters;
    j["success_rate"] = rep.success_rate;
    j["avg_t_norm"] = rep.avg_t_norm;
    j["avg_linf"] = rep.avg_linf;
    j["avg_iterations"] = rep.avg_iterations;
    j["histogram"] = to_json(rep.histogram);
    json images = json::array();
    for (const auto& rec : rep.images) images.push_back(to_json(rec));
    j["images"] = images;
    return j;
}

inline json to_json(const SweepReport& sweep) {
    json j;
    j["model"] = sweep.model_id;
    json rows = json::array();
    for (const auto& row : sweep.rows) {
        json r;
        r["sigma"] = row.sigma;
        r["n_attacked"] = row.n_attacked;
        r["success_rate"] = row.success_rate;
        r["avg_t_norm"] = row.avg_t_norm;
        r["avg_linf"] = row.avg_linf;
        r["avg_iterations"] = row.avg_iterations;
        rows.push_back(r);
    }
    j["rows"] = rows;
    return j;
}

inline json to_json(const DefenseMatrix& matrix) {
    json j = json::array();
    for (const auto& cell : matrix.cells) {
        json c;
        c["model"] = cell.model_id;
        c["accuracy"] = cell.accuracy;
        c["pgd_success"] = cell.pgd_success;
        c["adef_success"] = cell.adef_success;
        c["n_attacked_pgd"] = cell.n_attacked_pgd;
        c["n_attacked_adef"] = cell.n_attacked_adef;
        j.push_back(c);
    }
    return j;
}

inline void write_json(const json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

// CSV mirror of the per-image records, one row per attacked image.
inline void write_report_csv(const ExperimentReport& rep, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "index,label,final_label,status,t_norm,linf,iterations,overshot\n";
    f.precision(17);
    for (const auto& rec : rep.images)
        f << rec.index << "," << rec.label << "," << rec.final_label << ","
          << to_string(rec.status) << "," << rec.t_norm << "," << rec.linf << ","
          << rec.iterations << "," << (rec.overshot ? 1 : 0) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

// --- single-result gallery -----------------------------------------------------

// Writes everything needed to inspect one attack: original and deformed
// images (8-bit views + lossless raw), the pixel perturbation r = deformed -
// original (raw + amplitude-normalized view), the vector field (raw + CSV),
// and a JSON summary.
inline void dump_gallery(const AttackResult& result, const Image& original,
                         const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir + ": " + ec.message());
    auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

    io::write_pnm(original, at("original.pgm"));
    io::write_image_raw(original, at("original.raw"));
    io::write_pnm(result.deformed, at("deformed.pgm"));
    io::write_image_raw(result.deformed, at("deformed.raw"));

    Image r(original.width(), original.channels());
    double peak = 0.0;
    for (std::size_t j = 0; j < r.data().size(); ++j) {
        r.data()[j] = result.deformed.data()[j] - original.data()[j];
        peak = std::max(peak, std::abs(r.data()[j]));
    }
    io::write_image_raw(r, at("perturbation.raw"));
    Image view(original.width(), original.channels());
    for (std::size_t j = 0; j < view.data().size(); ++j)
        view.data()[j] = peak > 0.0 ? 0.5 + r.data()[j] / (2.0 * peak) : 0.5;
    io::write_pnm(view, at("perturbation_view.pgm"));

    io::write_field_raw(result.tau, at("field.raw"));
    io::write_field_csv(result.tau, at("field.csv"));

    json summary;
    summary["status"] = to_string(result.status);
    summary["label"] = result.label;
    summary["final_label"] = result.final_label;
    summary["t_norm"] = result.norm;
    summary["linf"] = result.linf;
    summary["iterations"] = result.iterations;
    summary["overshot"] = result.overshot;
    json trace = json::array();
    for (const auto& it : result.trace) {
        json step;
        step["candidate"] = it.candidate;
        step["step_norm"] = it.step_norm;
        step["f"] = it.f;
        trace.push_back(step);
    }
    summary["trace"] = trace;
    write_json(summary, at("summary.json"));
}

}  // namespace adef::harness
