#include "ikrnet/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "ikrnet/data/dataset.hpp"
#include "ikrnet/data/synthetic.hpp"
#include "ikrnet/errors.hpp"
#include "ikrnet/eval/report.hpp"
#include "ikrnet/nn/checkpoint.hpp"
#include "ikrnet/record_io.hpp"
#include "ikrnet/train/trainer.hpp"

namespace ikrnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string data;

    // gen-data
    std::optional<std::size_t> patients;

    // augment
    std::string rates;
    std::string holdout_rates;

    // train
    std::string model_config;
    bool paper_config = false;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    std::optional<double> weight_decay;
    std::string resume;

    // eval / report
    std::string checkpoint;
    std::string partition = "holdout";
    std::string predictions;
};

json read_config_json(const std::string& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path);
    try {
        return json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
}

std::vector<double> parse_rates(const std::string& csv) {
    std::vector<double> rates;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw InvalidArgument("not a sampling rate: '" + item + "'");
        rates.push_back(v);
    }
    return rates;
}

void write_resolved(const fs::path& out, json resolved) {
    io::write_text(out / "resolved_config.json", resolved.dump(2) + "\n");
}

int cmd_gen_data(const Options& o, std::ostream& log) {
    auto spec = o.config.empty() ? data::SyntheticProtocolSpec{}
                                 : data::SyntheticProtocolSpec::from_json(read_config_json(o.config));
    if (o.seed) spec.seed = *o.seed;
    if (o.patients) spec.n_patients = *o.patients;
    spec.validate();

    auto generated = data::generate(spec);
    const data::PartitionRatios ratios;
    auto manifest = data::partition(generated.manifest, ratios, spec.seed);
    manifest = data::balance_classes(manifest, spec.seed);
    data::Dataset(manifest, std::move(generated.records)).save(o.out);
    write_resolved(o.out, {{"command", "gen-data"}, {"generator", spec.to_json()}, {"balanced", true}});

    log << "wrote " << manifest.records.size() << " records from " << manifest.patients().size()
        << " patients to " << o.out << "\n";
    for (auto p : data::kPartitions) {
        log << "  " << data::to_string(p) << ": " << manifest.in_partition(p).size() << " records\n";
    }
    return kExitOk;
}

int cmd_augment(const Options& o, std::ostream& log) {
    const std::string root = o.data.empty() ? o.out : o.data;
    auto ds = data::Dataset::load(root);
    const auto train_rates = o.rates.empty() ? data::kDefaultTrainRates : parse_rates(o.rates);
    const auto holdout_rates = o.holdout_rates.empty() ? data::kDefaultHoldoutRates : parse_rates(o.holdout_rates);
    const std::size_t before = ds.manifest().records.size();
    ds.set_manifest(data::augment_sampling_rates(ds.manifest(), train_rates, holdout_rates));
    ds.save(o.out);
    write_resolved(o.out, {{"command", "augment"},
                           {"data", root},
                           {"train_rates", train_rates},
                           {"holdout_rates", holdout_rates}});
    log << "added " << ds.manifest().records.size() - before << " augmented entries ("
        << ds.manifest().records.size() << " total)\n";
    return kExitOk;
}

model::IKrNetConfig resolve_model_config(const Options& o) {
    if (o.paper_config && !o.model_config.empty()) {
        throw ConfigError("--paper-config and --model-config are mutually exclusive");
    }
    if (o.paper_config) return model::IKrNetConfig::paper();
    if (!o.model_config.empty()) return model::IKrNetConfig::from_json(read_config_json(o.model_config));
    return model::IKrNetConfig::toy();
}

int cmd_train(const Options& o, std::ostream& log) {
    const auto cfg = resolve_model_config(o);
    auto opts = o.config.empty() ? train::TrainOptions{} : train::TrainOptions::from_json(read_config_json(o.config));
    if (o.epochs) opts.epochs = *o.epochs;
    if (o.batch_size) opts.batch_size = *o.batch_size;
    if (o.lr) opts.lr = *o.lr;
    if (o.weight_decay) opts.weight_decay = *o.weight_decay;
    if (o.seed) opts.seed = *o.seed;
    opts.validate();

    auto model = model::IKrNetModel<float>::build(cfg, opts.seed);
    if (!o.resume.empty()) nn::load_checkpoint(o.resume, model.store(), cfg.hash());

    const auto ds = data::Dataset::load(o.data);
    const auto train_set = train::materialize(ds, data::Partition::Train);
    const auto val_set = train::materialize(ds, data::Partition::Val);
    if (train_set.empty()) throw InvalidArgument("manifest has no train partition");
    if (val_set.empty()) throw InvalidArgument("manifest has no val partition");

    fs::create_directories(o.out);
    write_resolved(o.out, {{"command", "train"},
                           {"data", o.data},
                           {"model", cfg.to_json()},
                           {"model_hash", cfg.hash()},
                           {"training", opts.to_json()},
                           {"resume", o.resume.empty() ? json(nullptr) : json(o.resume)}});
    io::write_text(fs::path(o.out) / "model_config.json", cfg.to_json().dump(2) + "\n");

    std::ofstream jsonl(fs::path(o.out) / "train_log.jsonl", std::ios::trunc);
    log << "training " << model.count_parameters() << " parameters on " << train_set.size() << " records, "
        << val_set.size() << " for validation\n";
    const auto result = train::fit(model, train_set, val_set, opts, [&](const train::EpochLog& e) {
        const auto line = e.to_json().dump();
        jsonl << line << "\n";
        jsonl.flush();
        log << line << "\n";
    });
    io::write_text(fs::path(o.out) / "model.ckpt", result.best_checkpoint);
    log << "best epoch " << result.best_epoch << ", checkpoint " << (fs::path(o.out) / "model.ckpt").string()
        << "\n";
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& log) {
    const auto header = nn::read_checkpoint_header(o.checkpoint);
    model::IKrNetConfig cfg;
    try {
        cfg = model::IKrNetConfig::from_json(header.at("config"));
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("checkpoint header lacks a model config: ") + e.what());
    }
    const std::string hash = header.value("config_hash", "");
    if (!o.model_config.empty() || o.paper_config) {
        const auto expected = resolve_model_config(o);
        if (expected.hash() != hash) {
            throw IntegrityError("checkpoint was trained with config " + hash + ", not " + expected.hash());
        }
    }
    auto model = model::IKrNetModel<float>::build(cfg, 0);
    nn::load_checkpoint(o.checkpoint, model.store(), hash);

    const auto part = data::partition_from_string(o.partition);
    const auto ds = data::Dataset::load(o.data);
    const auto set = train::materialize(ds, part);
    if (set.empty()) throw InvalidArgument("manifest has no " + o.partition + " partition");

    train::ModelScorer scorer(model, o.batch_size.value_or(64));
    const auto preds = train::predict(scorer, set);
    const auto report = eval::build_report(preds);
    eval::write_report(report, o.out);
    io::write_text(fs::path(o.out) / "predictions.json", eval::predictions_to_json(preds).dump(2) + "\n");
    write_resolved(o.out, {{"command", "eval"},
                           {"data", o.data},
                           {"checkpoint", o.checkpoint},
                           {"model_hash", hash},
                           {"partition", o.partition}});
    log << "accuracy " << report.overall.accuracy << " on " << preds.size() << " records";
    if (report.apd_zones) log << ", zone APD " << *report.apd_zones;
    if (report.apd_by_rate) log << ", rate-wise APD " << report.apd_by_rate->mean << " +- " << report.apd_by_rate->std;
    log << "\n";
    return kExitOk;
}

int cmd_report(const Options& o, std::ostream& log) {
    json j;
    try {
        j = json::parse(io::read_text(o.predictions));
    } catch (const json::parse_error& e) {
        throw IntegrityError("cannot parse " + o.predictions + ": " + e.what());
    }
    const auto preds = eval::predictions_from_json(j);
    const auto report = eval::build_report(preds);
    eval::write_report(report, o.out);
    write_resolved(o.out, {{"command", "report"}, {"predictions", o.predictions}});
    log << "accuracy " << report.overall.accuracy << " on " << preds.size() << " records\n";
    return kExitOk;
}

void apply_thread_cap() {
    if (const char* env = std::getenv("IKRNET_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"ECG drug-footprint classifier: data generation, training and robustness evaluation"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out, "output directory")->required();
        sub->add_option("--seed", o.seed, "master seed");
    };

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic protocol dataset");
    add_common(gen);
    gen->add_option("--config", o.config, "generator spec JSON");
    gen->add_option("--patients", o.patients, "override the number of patients");

    auto* aug = app.add_subcommand("augment", "add sampling-rate augmented copies to a dataset");
    add_common(aug);
    aug->add_option("--data", o.data, "dataset root (defaults to --out)");
    aug->add_option("--rates", o.rates, "train/val/eval rates, comma separated");
    aug->add_option("--holdout-rates", o.holdout_rates, "holdout rates, comma separated");

    auto* tr = app.add_subcommand("train", "train a model on the train partition");
    add_common(tr);
    tr->add_option("--data", o.data, "dataset root")->required();
    tr->add_option("--config", o.config, "training options JSON");
    tr->add_option("--model-config", o.model_config, "model config JSON (default: toy)");
    tr->add_flag("--paper-config", o.paper_config, "use the full-size model config");
    tr->add_option("--epochs", o.epochs);
    tr->add_option("--batch-size", o.batch_size);
    tr->add_option("--lr", o.lr);
    tr->add_option("--weight-decay", o.weight_decay);
    tr->add_option("--resume", o.resume, "checkpoint to start from");

    auto* ev = app.add_subcommand("eval", "score a partition and write the evaluation report");
    add_common(ev);
    ev->add_option("--data", o.data, "dataset root")->required();
    ev->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    ev->add_option("--model-config", o.model_config, "refuse unless the checkpoint matches this config");
    ev->add_flag("--paper-config", o.paper_config);
    ev->add_option("--partition", o.partition, "partition to score")->default_str("holdout");
    ev->add_option("--batch-size", o.batch_size);

    auto* rep = app.add_subcommand("report", "rebuild the evaluation report from predictions.json");
    add_common(rep);
    rep->add_option("--predictions", o.predictions, "predictions JSON")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    apply_thread_cap();
    try {
        if (*gen) return cmd_gen_data(o, out);
        if (*aug) return cmd_augment(o, out);
        if (*tr) return cmd_train(o, out);
        if (*ev) return cmd_eval(o, out);
        if (*rep) return cmd_report(o, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "invalid argument: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "data integrity error: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const fs::filesystem_error& e) {
        err << "filesystem error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}

}  // namespace ikrnet::cli
