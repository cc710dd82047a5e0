// flatnn command-line tool: train models (flat / standard_at / natural),
// evaluate them under an attack suite, inspect single attacks, sweep the
// linear feedback oracle, and self-check gradients against finite
// differences.
//
// Every error path exits nonzero with a single-line, greppable
// "flatnn: E_<KIND>:" prefix on stderr.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flatnn/attacks.hpp"
#include "flatnn/checkpoint.hpp"
#include "flatnn/config.hpp"
#include "flatnn/data.hpp"
#include "flatnn/eval.hpp"
#include "flatnn/linear_control.hpp"
#include "flatnn/nn.hpp"
#include "flatnn/training.hpp"

namespace {

using namespace flatnn;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kAttackNames = {"NAT", "FGSM", "PGD", "PGD-20", "PGD-100", "MIM"};

std::string known_attacks() {
    std::string out;
    for (const auto& n : kAttackNames) out += (out.empty() ? "" : ", ") + n;
    return out;
}

AttackSpec make_attack_spec(const std::string& name, double eps, double kappa, std::size_t steps,
                            double lo, double hi) {
    if (name == "NAT") return {"NAT", AttackKind::nat, std::nullopt, 1.0};
    if (name == "FGSM") return {"FGSM", AttackKind::fgsm, AttackBudget{eps, eps, 1, false, lo, hi}, 1.0};
    if (name == "PGD") return {"PGD", AttackKind::pgd, AttackBudget{eps, kappa, steps, true, lo, hi}, 1.0};
    if (name == "PGD-20")
        return {"PGD-20", AttackKind::pgd, AttackBudget{eps, kappa, 20, true, lo, hi}, 1.0};
    if (name == "PGD-100")
        return {"PGD-100", AttackKind::pgd, AttackBudget{eps, kappa, 100, true, lo, hi}, 1.0};
    if (name == "MIM") return {"MIM", AttackKind::mim, AttackBudget{eps, kappa, 20, false, lo, hi}, 1.0};
    throw UsageError("unknown attack name '" + name + "' (valid: " + known_attacks() + ")");
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        std::string item = csv.substr(start, comma - start);
        if (!item.empty()) out.push_back(item);
        start = comma + 1;
        if (comma == csv.size()) break;
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& flag) {
    std::vector<double> out;
    for (const std::string& item : split_list(csv)) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end != item.c_str() + item.size())
            throw UsageError("bad number '" + item + "' in " + flag);
        out.push_back(v);
    }
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv, const std::string& flag) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(csv, flag)) {
        if (v < 0 || v != std::floor(v)) throw UsageError("expected integers in " + flag);
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << content;
}

// ---------------------------------------------------------------- train ---

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    RunConfig cfg = load_config(config_path);
    if (seed_override) cfg.train.seed = *seed_override;
    cfg.train.validate();

    if (cfg.train.method == TrainMethod::natural && cfg.train.attack_steps > 0)
        std::cerr << "warning: attack steps are ignored for method=natural\n";

    Dataset data = cfg.load_dataset();
    std::filesystem::create_directories(out_dir);
    const std::string history_path = (std::filesystem::path(out_dir) / "history.csv").string();
    const std::string ckpt_path = (std::filesystem::path(out_dir) / "model.ckpt").string();

    CheckpointMeta meta;
    meta.train_seed = cfg.train.seed;
    meta.epochs = static_cast<std::uint32_t>(cfg.train.epochs);
    meta.config_echo = cfg.raw_text;

    TrainHistory hist;
    if (cfg.train.method == TrainMethod::flat) {
        FeedbackModel model = cfg.build_feedback_model(data.dim(), data.classes);
        hist = flat_train(model, data, cfg.train);
        save_checkpoint(model, meta, ckpt_path);
    } else {
        ModelParams model = cfg.build_plain_model(data.dim(), data.classes);
        MlpSpec spec{data.dim(), cfg.model.hidden, static_cast<std::size_t>(data.classes)};
        if (cfg.train.method == TrainMethod::standard_at)
            hist = standard_at_train(model, data, cfg.train);
        else
            hist = natural_train(model, data, cfg.train);
        save_checkpoint(model, spec, meta, ckpt_path);
    }
    write_file(history_path, hist.to_csv());

    std::printf("trained method=%s epochs=%zu batches=%zu updates=%zu\n",
                to_string(cfg.train.method).c_str(), cfg.train.epochs, hist.batches_seen,
                hist.param_updates);
    if (!hist.epochs.empty()) {
        const EpochStats& last = hist.epochs.back();
        std::printf("final epoch: clean_loss=%.4f adv_loss=%.4f clean_acc=%.2f robust_acc=%.2f\n",
                    last.clean_loss, last.adv_loss, last.clean_acc, last.robust_acc);
    }
    std::printf("wrote %s and %s\n", history_path.c_str(), ckpt_path.c_str());
    return 0;
}

// ----------------------------------------------------------------- eval ---

struct LoadedModel {
    bool is_feedback = false;
    FeedbackModel feedback;
    ModelParams plain;
    std::string method;
};

LoadedModel load_model(const Checkpoint& ckpt) {
    LoadedModel m;
    m.is_feedback = ckpt.is_feedback;
    if (ckpt.is_feedback) {
        m.feedback = feedback_from_checkpoint(ckpt);
        m.method = "feedback";
    } else {
        m.plain = mlp_from_checkpoint(ckpt);
        m.method = "plain";
    }
    return m;
}

Dataset dataset_for(const Checkpoint& ckpt, const std::string& config_path) {
    if (!config_path.empty()) return load_config(config_path).load_dataset();
    if (ckpt.meta.config_echo.empty())
        throw UsageError("checkpoint has no embedded config; pass --config to supply a dataset");
    return parse_config(ckpt.meta.config_echo).load_dataset();
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path, const std::string& attacks_csv,
             double eps, double kappa, std::size_t steps, std::uint64_t seed, std::size_t runs,
             const std::string& out_csv, const std::string& format) {
    if (format != "text_table" && format != "csv")
        throw UsageError("unknown --format '" + format + "' (valid: text_table, csv)");
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    LoadedModel model = load_model(ckpt);
    Dataset data = dataset_for(ckpt, config_path);

    // budget defaults come from the config echoed into the checkpoint
    if (eps <= 0.0 || kappa <= 0.0) {
        RunConfig echo = config_path.empty() && !ckpt.meta.config_echo.empty()
                             ? parse_config(ckpt.meta.config_echo)
                             : load_config(config_path);
        if (eps <= 0.0) eps = echo.train.eps;
        if (kappa <= 0.0) kappa = echo.train.kappa;
    }

    AttackSuite suite;
    for (const std::string& name : split_list(attacks_csv))
        suite.attacks.push_back(make_attack_spec(name, eps, kappa, steps, data.lo, data.hi));

    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < runs; ++i) seeds.push_back(seed + i);

    AccuracyReport report;
    if (model.is_feedback)
        report = evaluate(model.feedback, data, suite, seeds, model.method, "config-data");
    else
        report = evaluate(model.plain, data, suite, seeds, model.method, "config-data");

    std::fputs(render_report(report, format == "csv" ? ReportFormat::csv : ReportFormat::text_table)
                   .c_str(),
               stdout);
    if (!out_csv.empty()) write_file(out_csv, render_report(report, ReportFormat::csv));
    return 0;
}

// --------------------------------------------------------------- attack ---

int cmd_attack(const std::string& ckpt_path, const std::string& config_path, const std::string& name,
               double eps, double kappa, std::size_t steps, std::uint64_t seed,
               const std::string& out_csv) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    LoadedModel model = load_model(ckpt);
    Dataset data = dataset_for(ckpt, config_path);
    AttackSpec spec = make_attack_spec(name, eps, kappa, steps, data.lo, data.hi);

    Tensor x_adv = data.inputs.detached();
    if (spec.kind != AttackKind::nat) {
        auto run = [&](const auto& m) {
            switch (spec.kind) {
                case AttackKind::fgsm: return fgsm(m, data.inputs, data.labels, *spec.budget);
                case AttackKind::pgd: return pgd(m, data.inputs, data.labels, *spec.budget, seed);
                default: return mim(m, data.inputs, data.labels, *spec.budget, spec.mim_decay, seed);
            }
        };
        x_adv = model.is_feedback ? run(model.feedback) : run(model.plain);
    }

    double clean_acc, adv_acc;
    if (model.is_feedback) {
        clean_acc = accuracy_percent(model.feedback, data.inputs, data.labels);
        adv_acc = accuracy_percent(model.feedback, x_adv, data.labels);
    } else {
        clean_acc = accuracy_percent(model.plain, data.inputs, data.labels);
        adv_acc = accuracy_percent(model.plain, x_adv, data.labels);
    }
    double max_linf = 0.0, mean_linf = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < data.dim(); ++j)
            row = std::max(row, std::abs(x_adv(i, j) - data.inputs(i, j)));
        max_linf = std::max(max_linf, row);
        mean_linf += row;
    }
    mean_linf /= static_cast<double>(data.size());

    std::printf("attack=%s eps=%g kappa=%g steps=%zu seed=%llu\n", spec.name.c_str(), eps, kappa,
                spec.budget ? spec.budget->steps : 0,
                static_cast<unsigned long long>(seed));
    std::printf("clean_acc=%.2f adv_acc=%.2f mean_linf=%.6f max_linf=%.6f\n", clean_acc, adv_acc,
                mean_linf, max_linf);

    if (!out_csv.empty()) {
        std::string csv;
        char buf[64];
        for (std::size_t i = 0; i < data.size(); ++i) {
            csv += std::to_string(data.labels[i]);
            for (std::size_t j = 0; j < data.dim(); ++j) {
                std::snprintf(buf, sizeof buf, ",%.17g", x_adv(i, j));
                csv += buf;
            }
            csv += "\n";
        }
        write_file(out_csv, csv);
        std::printf("wrote adversarial examples to %s\n", out_csv.c_str());
    }
    return 0;
}

// ---------------------------------------------------------- linear-demo ---

int cmd_linear_demo(std::size_t n, double eps, const std::string& kappas_csv,
                    const std::string& unrolls_csv, std::uint64_t seed, const std::string& out_csv) {
    std::vector<double> kappas;
    if (kappas_csv.empty()) {
        // 20-point grid kappa = t*eps, t in [0, 2] skipping the pole t = 1
        for (int i = 0; i <= 9; ++i) kappas.push_back(eps * 0.1 * i);
        for (int i = 11; i <= 20; ++i) kappas.push_back(eps * 0.1 * i);
    } else {
        kappas = parse_double_list(kappas_csv, "--kappas");
    }
    std::vector<std::size_t> unrolls = unrolls_csv.empty()
                                           ? std::vector<std::size_t>{0, 1, 2, 5, 10, 20, 50}
                                           : parse_size_list(unrolls_csv, "--unrolls");

    LinearSystem sys = build_example_system(n, eps, seed);
    Tensor probe = sys.dominant_vector();
    for (double& v : probe.data) v *= eps;

    std::string csv = "epsilon,kappa,P,predicted_gain,measured_gain,abs_error\n";
    char buf[192];
    double max_abs_error = 0.0;
    for (double kappa : kappas) {
        LinearController ctrl = make_controller(sys, kappa);

        // exact closed loop, reported with P = -1
        if (kappa == eps) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,-1,pole,pole,pole\n", eps, kappa);
            csv += buf;
        } else {
            const double predicted = exact_gain(eps, kappa);
            const double measured = detail::norm2(closed_loop_output(sys, ctrl, probe));
            const double err = std::abs(measured - predicted);
            max_abs_error = std::max(max_abs_error, err);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,-1,%.17g,%.17g,%.17g\n", eps, kappa, predicted,
                          measured, err);
            csv += buf;
        }

        for (std::size_t p : unrolls) {
            const double predicted = iterated_gain(eps, kappa, p);
            const double measured = detail::norm2(iterated_feedback(sys, ctrl, probe, p));
            const double err = std::abs(measured - predicted);
            max_abs_error = std::max(max_abs_error, err);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu,%.17g,%.17g,%.17g\n", eps, kappa, p,
                          predicted, measured, err);
            csv += buf;
        }
    }

    if (out_csv.empty())
        std::fputs(csv.c_str(), stdout);
    else
        write_file(out_csv, csv);
    std::fprintf(stderr, "max_abs_error=%.3e over %zu kappas x %zu unroll counts (n=%zu, eps=%g)\n",
                 max_abs_error, kappas.size(), unrolls.size(), n, eps);
    return 0;
}

// ------------------------------------------------------------ gradcheck ---

struct GradCheckReport {
    double worst = 0.0;
    void note(const std::string& name, double v) {
        std::printf("  %-42s worst_rel_err = %.3e\n", name.c_str(), v);
        worst = std::max(worst, v);
    }
};

// Relative error with a 1e-3 denominator floor: above the floor this is the
// plain relative error; below it the 1e-5 threshold amounts to 1e-8 absolute
// agreement, two orders above the landing noise of an f64 central difference
// at h = 1e-6 (tighter than that is unresolvable by the oracle itself).
double rel_error(const Tensor& ad, const Tensor& fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) {
        const double denom = std::max({std::abs(ad.data[i]), std::abs(fd.data[i]), 1e-3});
        worst = std::max(worst, std::abs(ad.data[i] - fd.data[i]) / denom);
    }
    return worst;
}

// Worst relative error between reverse-mode and central finite-difference
// gradients of the cross-entropy loss, over all parameters and the input.
template <class Model>
double model_gradcheck(Model model, const Tensor& x0, const std::vector<int>& labels, bool corrupt) {
    Model probe = model;  // untracked copy driving the finite differences
    const double h = 1e-6;

    GradientRecord rec;
    Tensor x = x0.detached();
    rec.watch(x);
    std::vector<Tensor*> params = parameter_list(model);
    for (Tensor* t : params) rec.watch(*t);
    backward(rec, softmax_cross_entropy(model_logits(model, x), labels));

    std::vector<Tensor> ad;
    for (Tensor* t : params) ad.push_back(rec.adjoint(*t));
    ad.push_back(rec.adjoint(x));
    if (corrupt && !ad.empty() && ad[0].size() > 0) ad[0].data[0] += 1e-3;

    auto loss_of_probe = [&](const Tensor& xin) {
        return softmax_cross_entropy(model_logits(probe, xin), labels).data[0];
    };

    double worst = 0.0;
    std::vector<Tensor*> probe_params = parameter_list(probe);
    for (std::size_t t = 0; t < probe_params.size(); ++t) {
        Tensor fd = Tensor::zeros(probe_params[t]->shape);
        for (std::size_t i = 0; i < fd.size(); ++i) {
            const double orig = probe_params[t]->data[i];
            probe_params[t]->data[i] = orig + h;
            const double fp = loss_of_probe(x0);
            probe_params[t]->data[i] = orig - h;
            const double fm = loss_of_probe(x0);
            probe_params[t]->data[i] = orig;
            fd.data[i] = (fp - fm) / (2.0 * h);
        }
        worst = std::max(worst, rel_error(ad[t], fd));
    }
    worst = std::max(worst, rel_error(ad.back(), finite_diff_gradient(loss_of_probe, x0, h)));
    return worst;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t input_dim, std::size_t classes,
                  const std::string& hidden_csv, const std::string& controller_csv, std::size_t batch,
                  bool corrupt) {
    const std::vector<std::size_t> hidden = parse_size_list(hidden_csv, "--hidden");
    const std::vector<std::size_t> controller_hidden =
        parse_size_list(controller_csv, "--controller-hidden");

    Rng rng(derive_seed(seed, 0x9c));
    Tensor x = Tensor::zeros({batch, input_dim});
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    std::vector<int> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(rng.index(classes));

    GradCheckReport report;

    MlpSpec main_spec{input_dim, hidden, classes};
    ModelParams plain = init_params(main_spec, derive_seed(seed, 1));
    report.note("plain classifier", model_gradcheck(plain, x, labels, corrupt));

    // the controller is itself an MLP; check it standalone on its own input
    MlpSpec ctrl_spec{classes, controller_hidden, input_dim};
    ModelParams ctrl = init_params(ctrl_spec, derive_seed(seed, 2));
    Tensor cx = Tensor::zeros({batch, classes});
    for (double& v : cx.data) v = rng.uniform(-1.0, 1.0);
    std::vector<int> clabels(batch);
    for (std::size_t i = 0; i < batch; ++i) clabels[i] = static_cast<int>(rng.index(input_dim));
    report.note("controller network", model_gradcheck(ctrl, cx, clabels, false));

    for (ControllerInput mode :
         {ControllerInput::predictions_only, ControllerInput::features_and_predictions}) {
        for (std::size_t unroll : {1ul, 2ul}) {
            FeedbackModel fb = make_feedback_model(main_spec, controller_hidden, unroll, mode,
                                                   derive_seed(seed, 3 + unroll));
            const std::string name =
                "feedback model P=" + std::to_string(unroll) + " " + to_string(mode);
            report.note(name, model_gradcheck(fb, x, labels, false));
        }
    }

    std::printf("worst relative error: %.3e (threshold 1e-05)\n", report.worst);
    const bool pass = report.worst <= 1e-5;
    std::printf("%s\n", pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feedback neural networks: adversarial training and evaluation"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a model from a config file");
    std::string train_config, train_out = "flatnn_run";
    std::uint64_t train_seed = 0;
    bool train_seed_set = false;
    train->add_option("--config", train_config, "run configuration file")->required();
    train->add_option("--out", train_out, "output directory (history.csv, model.ckpt)");
    train->add_option("--seed", train_seed, "override [train] seed")->each([&](const std::string&) {
        train_seed_set = true;
    });

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint under an attack suite");
    std::string eval_ckpt, eval_config, eval_attacks = "NAT,FGSM,PGD-20,PGD-100,MIM";
    std::string eval_out, eval_format = "text_table";
    double eval_eps = 0.0, eval_kappa = 0.0;
    std::size_t eval_steps = 20, eval_runs = 5;
    std::uint64_t eval_seed = 1;
    eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval->add_option("--config", eval_config, "config supplying the dataset (default: checkpoint echo)");
    eval->add_option("--attack", eval_attacks, "comma list of attacks (" + known_attacks() + ")");
    eval->add_option("--eps", eval_eps, "attack radius (default: from config)");
    eval->add_option("--kappa", eval_kappa, "attack step size (default: from config)");
    eval->add_option("--steps", eval_steps, "steps for the generic PGD attack name");
    eval->add_option("--seed", eval_seed, "base evaluation seed");
    eval->add_option("--runs", eval_runs, "number of evaluation seeds");
    eval->add_option("--out", eval_out, "also write the CSV report to this path");
    eval->add_option("--format", eval_format, "stdout format: text_table or csv");

    // attack
    auto* attack = app.add_subcommand("attack", "run one attack against a checkpoint and report");
    std::string atk_ckpt, atk_config, atk_name = "PGD-20", atk_out;
    double atk_eps = 0.3, atk_kappa = 0.075;
    std::size_t atk_steps = 20;
    std::uint64_t atk_seed = 1;
    attack->add_option("--checkpoint", atk_ckpt, "model checkpoint")->required();
    attack->add_option("--config", atk_config, "config supplying the dataset (default: checkpoint echo)");
    attack->add_option("--attack", atk_name, "attack name (" + known_attacks() + ")");
    attack->add_option("--eps", atk_eps, "attack radius");
    attack->add_option("--kappa", atk_kappa, "attack step size");
    attack->add_option("--steps", atk_steps, "steps for the generic PGD attack name");
    attack->add_option("--seed", atk_seed, "attack seed");
    attack->add_option("--out", atk_out, "write adversarial examples as label-first CSV");

    // linear-demo
    auto* demo = app.add_subcommand("linear-demo", "closed-loop gain sweep of the linear oracle");
    std::size_t demo_n = 10;
    double demo_eps = 0.1;
    std::string demo_kappas, demo_unrolls, demo_out;
    std::uint64_t demo_seed = 1;
    demo->add_option("--n", demo_n, "system dimension");
    demo->add_option("--eps", demo_eps, "dominant eigenvalue reciprocal, in (0,1)");
    demo->add_option("--kappas", demo_kappas, "comma list of control gains (default: 20-point grid)");
    demo->add_option("--unrolls", demo_unrolls, "comma list of iteration counts (default: 0,1,2,5,10,20,50)");
    demo->add_option("--seed", demo_seed, "basis seed");
    demo->add_option("--out", demo_out, "write the CSV sweep to this path (default: stdout)");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "verify gradients against finite differences");
    std::uint64_t gc_seed = 7;
    std::size_t gc_dim = 4, gc_classes = 3, gc_batch = 3;
    std::string gc_hidden = "6,5", gc_ctrl = "5";
    bool gc_corrupt = false;
    gc->add_option("--seed", gc_seed, "input/parameter seed");
    gc->add_option("--input-dim", gc_dim, "classifier input width");
    gc->add_option("--classes", gc_classes, "class count");
    gc->add_option("--hidden", gc_hidden, "classifier hidden widths");
    gc->add_option("--controller-hidden", gc_ctrl, "controller hidden widths");
    gc->add_option("--batch", gc_batch, "probe batch size");
    gc->add_flag("--corrupt-adjoint", gc_corrupt, "test hook: corrupt one adjoint (must fail)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(train_config, train_out,
                                     train_seed_set ? std::optional<std::uint64_t>(train_seed)
                                                    : std::nullopt);
        if (*eval)
            return cmd_eval(eval_ckpt, eval_config, eval_attacks, eval_eps, eval_kappa, eval_steps,
                            eval_seed, eval_runs, eval_out, eval_format);
        if (*attack)
            return cmd_attack(atk_ckpt, atk_config, atk_name, atk_eps, atk_kappa, atk_steps, atk_seed,
                              atk_out);
        if (*demo) return cmd_linear_demo(demo_n, demo_eps, demo_kappas, demo_unrolls, demo_seed, demo_out);
        if (*gc) return cmd_gradcheck(gc_seed, gc_dim, gc_classes, gc_hidden, gc_ctrl, gc_batch, gc_corrupt);
    } catch (const UsageError& e) {
        std::cerr << "flatnn: E_USAGE: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "flatnn: E_CONFIG: " << e.what() << "\n";
        return 1;
    } catch (const CheckpointError& e) {
        std::cerr << "flatnn: E_CHECKPOINT: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "flatnn: E_DATA: " << e.what() << "\n";
        return 1;
    } catch (const TrainingError& e) {
        std::cerr << "flatnn: E_TRAIN: " << e.what() << "\n";
        return 1;
    } catch (const PoleError& e) {
        std::cerr << "flatnn: E_NUMERIC: " << e.what() << "\n";
        return 1;
    } catch (const SingularSystemError& e) {
        std::cerr << "flatnn: E_NUMERIC: " << e.what() << "\n";
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "flatnn: E_INVALID: " << e.what() << "\n";
        return 1;
    } catch (const ValueError& e) {
        std::cerr << "flatnn: E_INVALID: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "flatnn: E_INTERNAL: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
