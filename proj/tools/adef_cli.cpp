// Command-line front end for the deformation-attack toolkit.
//
//   train           fit a digit classifier, optionally hardened by an adversary
//   attack          run an attack campaign over a dataset split, write reports
//   sweep-sigma     one campaign per smoothing width over a shared image subset
//   defense-matrix  cross-evaluate models against the noise and deformation attacks
//   dump            attack a single image and write an inspection gallery
//
// The MNIST IDX files are looked up under --data-root, falling back to the
// ADEF_DATA_ROOT environment variable. Exit status is 0 on completion and
// nonzero on configuration or I/O errors.

#include "adef/harness.hpp"
#include "adef/nn/mnist.hpp"
#include "adef/nn/network.hpp"
#include "adef/nn/train.hpp"
#include "adef/pgd.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace {

namespace fs = std::filesystem;

std::string resolve_data_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("ADEF_DATA_ROOT"); env && *env) return env;
    return "data/mnist";
}

adef::nn::Dataset load_split(const std::string& root, const std::string& split) {
    return adef::nn::load_mnist(root, split == "train");
}

adef::nn::Network load_model(const std::string& arch, const std::string& path) {
    adef::nn::Network net = adef::nn::make_model(arch);
    net.load(path);
    return net;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

// Shared flags for the subcommands that run the deformation attack.
struct AttackFlags {
    double sigma = 0.5;
    double eta = 0.2;
    double epsilon = 3.0;
    int max_iters = 100;
    int candidates = 0;     // 0 = all incorrect labels
    int target_label = -1;  // < 0 = untargeted
    int target_rank = 0;    // 0 = untargeted; k >= 2 targets the k-th highest clean logit

    void add_to(CLI::App& cmd, bool with_targets) {
        cmd.add_option("--sigma", sigma, "Gaussian smoothing width (0 disables smoothing)")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        cmd.add_option("--eta", eta, "relative push applied to the total field when an iterate lands on the decision boundary")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        cmd.add_option("--epsilon", epsilon, "largest accepted deformation size (sup of pixel displacement norms)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--max-iters", max_iters, "iteration budget per image")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        auto* m = cmd.add_option("-m,--candidates", candidates,
                                 "number of closest-logit candidate labels (0 = all incorrect labels)")
                      ->check(CLI::NonNegativeNumber)
                      ->capture_default_str();
        auto* all = cmd.add_flag_callback(
            "--all-candidates", [this] { candidates = 0; },
            "consider every incorrect label (the default)");
        m->excludes(all);
        if (with_targets) {
            auto* tgt = cmd.add_option("--target", target_label, "fixed target label (0-9)")
                            ->check(CLI::Range(0, 9));
            auto* rank = cmd.add_option(
                                "--target-rank", target_rank,
                                "per image, target the label with the k-th highest clean logit (k >= 2)")
                             ->check(CLI::Range(2, 10));
            tgt->excludes(rank)->excludes(m)->excludes(all);
            rank->excludes(m)->excludes(all);
        }
    }

    adef::AdefConfig config() const {
        adef::AdefConfig cfg;
        cfg.epsilon = epsilon;
        cfg.sigma = sigma;
        cfg.max_iterations = max_iters;
        cfg.candidate_count = candidates;
        cfg.overshoot = eta;
        if (target_label >= 0) cfg.target = target_label;
        return cfg;
    }
};

// --- train -------------------------------------------------------------------

struct TrainArgs {
    std::string arch = "mnist-a";
    std::string adversary = "none";
    std::string data_root;
    std::string out;
    int limit = 0;
    bool eval = false;
    adef::nn::TrainConfig cfg;
    // Training-time attack strengths. Both adversaries run shorter than the
    // evaluation attacks so each minibatch stays affordable.
    adef::PgdConfig pgd{0.3, 0.05, 12, true};
    AttackFlags adef;

    TrainArgs() { adef.max_iters = 15; }
};

int run_train(const TrainArgs& a) {
    const adef::nn::Dataset data =
        adef::nn::head(load_split(resolve_data_root(a.data_root), "train"), a.limit);
    adef::nn::Network net = adef::nn::make_model(a.arch);
    std::cout << "training " << a.arch << " on " << data.size() << " examples ("
              << net.parameter_count() << " parameters, adversary: " << a.adversary
              << ")\n";

    adef::nn::BatchAdversary hook;
    auto adv_rng = std::make_unique<std::mt19937_64>(a.cfg.seed ^ 0x9e3779b97f4a7c15ull);
    if (a.adversary == "pgd") {
        a.pgd.validate();
        hook = adef::adversary_hook(net, adef::AdversaryKind::pgd, a.pgd, {}, adv_rng.get());
    } else if (a.adversary == "adef") {
        adef::AdefConfig cfg = a.adef.config();
        hook = adef::adversary_hook(net, adef::AdversaryKind::adef, {}, cfg);
    }

    adef::nn::train(net, data, a.cfg, hook, [](const adef::nn::EpochStats& s) {
        std::cout << "epoch " << s.epoch << ": loss " << s.mean_loss << ", accuracy "
                  << s.train_accuracy << "\n";
    });
    net.save(a.out);
    std::cout << "weights written to " << a.out << "\n";

    if (a.eval) {
        const adef::nn::Dataset test = load_split(resolve_data_root(a.data_root), "test");
        std::cout << "test accuracy: " << adef::nn::accuracy(net, test) << "\n";
    }
    return 0;
}

// --- attack ------------------------------------------------------------------

struct CampaignArgs {
    std::string model;
    std::string arch = "mnist-a";
    std::string model_id;
    std::string split = "test";
    std::string data_root;
    std::string out;
    int limit = 1000;
    std::uint64_t seed = 0;  // reserved; the deformation attack is deterministic
    AttackFlags flags;
};

int run_attack(const CampaignArgs& a) {
    const adef::nn::Network net = load_model(a.arch, a.model);
    const adef::nn::Dataset data = load_split(resolve_data_root(a.data_root), a.split);
    const std::string id = a.model_id.empty() ? a.arch : a.model_id;

    const adef::harness::ExperimentReport rep = adef::harness::run_attack_campaign(
        net, data, a.flags.config(), a.limit, id, nullptr, a.flags.target_rank);

    ensure_dir(a.out);
    adef::harness::write_json(adef::harness::to_json(rep), join(a.out, "report.json"));
    adef::harness::write_report_csv(rep, join(a.out, "report.csv"));

    std::cout << "accuracy " << rep.accuracy << ", attacked " << rep.n_attacked
              << ", success rate " << rep.success_rate << ", avg size " << rep.avg_t_norm
              << ", avg pixel sup " << rep.avg_linf << ", avg iterations "
              << rep.avg_iterations << "\n"
              << "reports written to " << a.out << "\n";
    return 0;
}

// --- sweep-sigma ---------------------------------------------------------------

struct SweepArgs {
    std::string model;
    std::string arch = "mnist-a";
    std::string model_id;
    std::string split = "test";
    std::string data_root;
    std::string out;
    int limit = 500;
    std::vector<double> sigmas = {0.0, 1.0, 2.0, 4.0};
    AttackFlags flags;
};

int run_sweep(const SweepArgs& a) {
    const adef::nn::Network net = load_model(a.arch, a.model);
    const adef::nn::Dataset data = load_split(resolve_data_root(a.data_root), a.split);
    const std::string id = a.model_id.empty() ? a.arch : a.model_id;

    const adef::harness::SweepReport sweep =
        adef::harness::run_sigma_sweep(net, data, a.sigmas, a.limit, a.flags.config(), id);

    ensure_dir(a.out);
    adef::harness::write_json(adef::harness::to_json(sweep), join(a.out, "sweep.json"));

    for (const auto& row : sweep.rows)
        std::cout << "sigma " << row.sigma << ": success rate " << row.success_rate
                  << ", avg size " << row.avg_t_norm << ", avg iterations "
                  << row.avg_iterations << "\n";
    std::cout << "report written to " << a.out << "\n";
    return 0;
}

// --- defense-matrix --------------------------------------------------------------

struct MatrixArgs {
    std::string arch = "mnist-a";
    std::string split = "test";
    std::string data_root;
    std::string out;
    int limit = 500;
    std::vector<std::string> models;  // "id=path" or plain paths (id = file stem)
    adef::PgdConfig pgd;              // evaluation defaults: 40 x 0.01 within 0.3
    AttackFlags flags;
};

int run_matrix(const MatrixArgs& a) {
    const adef::nn::Dataset data = load_split(resolve_data_root(a.data_root), a.split);

    std::vector<std::pair<std::string, adef::nn::Network>> nets;
    nets.reserve(a.models.size());
    for (const std::string& spec : a.models) {
        const auto eq = spec.find('=');
        const std::string id =
            eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
        const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        nets.emplace_back(id, load_model(a.arch, path));
    }
    std::vector<std::pair<std::string, const adef::nn::Network*>> refs;
    refs.reserve(nets.size());
    for (const auto& [id, net] : nets) refs.emplace_back(id, &net);

    a.pgd.validate();
    const adef::harness::DefenseMatrix matrix =
        adef::harness::run_defense_matrix(refs, data, a.limit, a.pgd, a.flags.config());

    ensure_dir(a.out);
    adef::harness::write_json(adef::harness::to_json(matrix),
                              join(a.out, "defense_matrix.json"));

    for (const auto& cell : matrix.cells)
        std::cout << cell.model_id << ": accuracy " << cell.accuracy << ", noise attack "
                  << cell.pgd_success << ", deformation attack " << cell.adef_success
                  << "\n";
    std::cout << "report written to " << a.out << "\n";
    return 0;
}

// --- dump ------------------------------------------------------------------------

struct DumpArgs {
    std::string model;
    std::string arch = "mnist-a";
    std::string split = "test";
    std::string data_root;
    std::string out;
    int index = 0;
    AttackFlags flags;
};

int run_dump(const DumpArgs& a) {
    const adef::nn::Network net = load_model(a.arch, a.model);
    const adef::nn::Dataset data = load_split(resolve_data_root(a.data_root), a.split);
    if (a.index < 0 || a.index >= data.size())
        throw std::runtime_error("image index " + std::to_string(a.index) +
                                 " outside the dataset (size " +
                                 std::to_string(data.size()) + ")");

    const adef::Image x = data.image(a.index);
    const int label = data.labels[static_cast<std::size_t>(a.index)];
    adef::AdefConfig cfg = a.flags.config();
    if (a.flags.target_rank >= 2)
        cfg.target = adef::label_of_rank(net.logits(x), a.flags.target_rank);

    const adef::AttackResult r = adef::attack(net, x, label, cfg);
    adef::harness::dump_gallery(r, x, a.out);

    std::cout << "image " << a.index << " (label " << label << "): "
              << adef::to_string(r.status) << ", final label " << r.final_label
              << ", size " << r.norm << ", iterations " << r.iterations << "\n"
              << "gallery written to " << a.out << "\n";
    return 0;
}

void add_data_root_flag(CLI::App& cmd, std::string& slot) {
    cmd.add_option("--data-root", slot,
                   "directory with the IDX files (default: $ADEF_DATA_ROOT)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial deformation toolkit"};
    app.require_subcommand(1);

    // train
    TrainArgs train;
    CLI::App* train_cmd =
        app.add_subcommand("train", "train a classifier, optionally against an adversary");
    train_cmd->add_option("--arch", train.arch, "network architecture")
        ->check(CLI::IsMember({"mnist-a", "mnist-b"}))
        ->capture_default_str();
    train_cmd->add_option("--adversary", train.adversary, "minibatch adversary")
        ->check(CLI::IsMember({"none", "pgd", "adef"}))
        ->capture_default_str();
    train_cmd->add_option("--epochs", train.cfg.epochs)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--batch-size", train.cfg.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--learning-rate", train.cfg.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--momentum", train.cfg.momentum)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    train_cmd->add_option("--seed", train.cfg.seed, "RNG seed for init, shuffling, and dropout")->capture_default_str();
    train_cmd->add_option("--limit", train.limit, "train on the first N examples only (0 = all)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train_cmd->add_option("--out", train.out, "weight file to write")->required();
    train_cmd->add_flag("--eval", train.eval, "report test-set accuracy after training");
    add_data_root_flag(*train_cmd, train.data_root);
    train_cmd->add_option("--pgd-epsilon", train.pgd.epsilon_inf, "noise adversary: ball radius")->capture_default_str();
    train_cmd->add_option("--pgd-step", train.pgd.step, "noise adversary: step size")->capture_default_str();
    train_cmd->add_option("--pgd-iters", train.pgd.iterations, "noise adversary: iterations")->capture_default_str();
    train_cmd->add_option("--adef-sigma", train.adef.sigma, "deformation adversary: smoothing width")->capture_default_str();
    train_cmd->add_option("--adef-epsilon", train.adef.epsilon, "deformation adversary: size budget")->capture_default_str();
    train_cmd->add_option("--adef-iters", train.adef.max_iters, "deformation adversary: iteration budget")->capture_default_str();

    // attack
    CampaignArgs camp;
    CLI::App* attack_cmd =
        app.add_subcommand("attack", "attack a dataset split and write reports");
    attack_cmd->add_option("--model", camp.model, "weight file")->required();
    attack_cmd->add_option("--arch", camp.arch)->check(CLI::IsMember({"mnist-a", "mnist-b"}))->capture_default_str();
    attack_cmd->add_option("--model-id", camp.model_id, "identifier used in the report (default: arch)");
    attack_cmd->add_option("--split", camp.split)->check(CLI::IsMember({"test", "train"}))->capture_default_str();
    attack_cmd->add_option("--limit", camp.limit, "attack the first N correctly classified images (0 = all)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    attack_cmd->add_option("--seed", camp.seed,
                           "reserved for stochastic variants; the attack is deterministic");
    attack_cmd->add_option("--out", camp.out, "output directory for report.json / report.csv")->required();
    add_data_root_flag(*attack_cmd, camp.data_root);
    camp.flags.add_to(*attack_cmd, /*with_targets=*/true);

    // sweep-sigma
    SweepArgs sweep;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep-sigma", "campaign per smoothing width on a shared subset");
    sweep_cmd->add_option("--model", sweep.model, "weight file")->required();
    sweep_cmd->add_option("--arch", sweep.arch)->check(CLI::IsMember({"mnist-a", "mnist-b"}))->capture_default_str();
    sweep_cmd->add_option("--model-id", sweep.model_id, "identifier used in the report (default: arch)");
    sweep_cmd->add_option("--split", sweep.split)->check(CLI::IsMember({"test", "train"}))->capture_default_str();
    sweep_cmd->add_option("--sigmas", sweep.sigmas, "smoothing widths to sweep")
        ->delimiter(',')
        ->capture_default_str();
    sweep_cmd->add_option("--limit", sweep.limit, "shared subset size (0 = all correctly classified)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sweep_cmd->add_option("--out", sweep.out, "output directory for sweep.json")->required();
    add_data_root_flag(*sweep_cmd, sweep.data_root);
    sweep.flags.add_to(*sweep_cmd, /*with_targets=*/false);
    sweep_cmd->get_option("--sigma")->group("");  // the list drives sigma; hide the scalar

    // defense-matrix
    MatrixArgs matrix;
    CLI::App* matrix_cmd = app.add_subcommand(
        "defense-matrix", "cross-evaluate models against both attack families");
    matrix_cmd->add_option("--model", matrix.models, "weight file, repeatable; 'id=path' names the row")
        ->required();
    matrix_cmd->add_option("--arch", matrix.arch)->check(CLI::IsMember({"mnist-a", "mnist-b"}))->capture_default_str();
    matrix_cmd->add_option("--split", matrix.split)->check(CLI::IsMember({"test", "train"}))->capture_default_str();
    matrix_cmd->add_option("--limit", matrix.limit, "attacked images per model (0 = all correctly classified)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    matrix_cmd->add_option("--pgd-epsilon", matrix.pgd.epsilon_inf, "noise attack: ball radius")->capture_default_str();
    matrix_cmd->add_option("--pgd-step", matrix.pgd.step, "noise attack: step size")->capture_default_str();
    matrix_cmd->add_option("--pgd-iters", matrix.pgd.iterations, "noise attack: iterations")->capture_default_str();
    matrix_cmd->add_option("--out", matrix.out, "output directory for defense_matrix.json")->required();
    add_data_root_flag(*matrix_cmd, matrix.data_root);
    matrix.flags.add_to(*matrix_cmd, /*with_targets=*/false);

    // dump
    DumpArgs dump;
    CLI::App* dump_cmd =
        app.add_subcommand("dump", "attack one image and write an inspection gallery");
    dump_cmd->add_option("--model", dump.model, "weight file")->required();
    dump_cmd->add_option("--arch", dump.arch)->check(CLI::IsMember({"mnist-a", "mnist-b"}))->capture_default_str();
    dump_cmd->add_option("--split", dump.split)->check(CLI::IsMember({"test", "train"}))->capture_default_str();
    dump_cmd->add_option("--index", dump.index, "dataset index of the image")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    dump_cmd->add_option("--out", dump.out, "gallery directory")->required();
    add_data_root_flag(*dump_cmd, dump.data_root);
    dump.flags.add_to(*dump_cmd, /*with_targets=*/true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return run_train(train);
        if (*attack_cmd) return run_attack(camp);
        if (*sweep_cmd) return run_sweep(sweep);
        if (*matrix_cmd) return run_matrix(matrix);
        if (*dump_cmd) return run_dump(dump);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
