// evirex command line: binds the pipeline stages into reproducible
// experiments. Talks to the core strictly through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evirex/evirex.h"

namespace {

struct StringGuard {
    char* s = nullptr;
    ~StringGuard() { evx_string_free(s); }
};

[[noreturn]] void die(const std::string& what) {
    std::cerr << "error: " << what << ": " << evx_last_error() << "\n";
    std::exit(1);
}

void check(int rc, const std::string& what) {
    if (rc != EVX_OK) die(what);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        std::exit(1);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        std::exit(1);
    }
    out << content;
}

// Common per-subcommand options assembled into effective key=value config
// text: stage defaults, then --config file, then individual flag overrides.
struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> overrides; // raw key=value pairs

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value configuration file");
        auto add_flag_key = [this, cmd](const std::string& flag, const std::string& key,
                                        const std::string& help) {
            cmd->add_option_function<std::string>(
                flag, [this, key](const std::string& v) { overrides.push_back(key + " = " + v); },
                help);
        };
        add_flag_key("--seed", "seed", "random seed");
        add_flag_key("--lambda", "lambda", "ER loss weight");
        add_flag_key("--evi-threshold", "evi_threshold", "evidence sentence threshold");
        add_flag_key("--er-supervision", "er_supervision", "gold|silver|none");
        add_flag_key("--re-loss", "re_loss", "atl|bce");
        add_flag_key("--epochs", "epochs", "training epochs");
        add_flag_key("--batch-size", "batch_size", "documents per optimizer step");
        add_flag_key("--lr-encoder", "lr_encoder", "encoder learning rate");
        add_flag_key("--lr-classifier", "lr_classifier", "classifier learning rate");
    }

    std::string effective(const std::string& stage) const {
        StringGuard defaults;
        check(evx_default_config(stage.c_str(), &defaults.s), "default config");
        std::string text = defaults.s;
        if (!config_path.empty()) text += "\n" + read_text_file(config_path);
        for (const std::string& kv : overrides) text += "\n" + kv;
        text += "\n";
        return text;
    }
};

using CorpusPtr = std::unique_ptr<evx_corpus, decltype(&evx_corpus_free)>;
using ModelPtr = std::unique_ptr<evx_model, decltype(&evx_model_free)>;
using StorePtr = std::unique_ptr<evx_store, decltype(&evx_store_free)>;
using PredsPtr = std::unique_ptr<evx_predictions, decltype(&evx_predictions_free)>;

CorpusPtr open_corpus(const std::string& path, const std::string& schema) {
    evx_corpus* c = nullptr;
    check(evx_corpus_open(path.c_str(), schema.c_str(), &c), "open corpus " + path);
    return CorpusPtr(c, &evx_corpus_free);
}

ModelPtr load_model(const std::string& path) {
    evx_model* m = nullptr;
    check(evx_model_load(path.c_str(), &m), "load checkpoint " + path);
    return ModelPtr(m, &evx_model_free);
}

void manifest(const std::string& artifact, const std::string& stage, const std::string& cfg,
              const std::vector<std::string>& inputs, const std::string& schema_path,
              const std::string& extra_json = "") {
    std::vector<const char*> raw;
    for (const auto& p : inputs) raw.push_back(p.c_str());
    check(evx_write_manifest(artifact.c_str(), stage.c_str(), cfg.c_str(), raw.data(),
                             static_cast<unsigned>(raw.size()),
                             schema_path.empty() ? nullptr : schema_path.c_str(),
                             extra_json.empty() ? nullptr : extra_json.c_str()),
          "write manifest for " + artifact);
}

int run_train_stage(const std::string& stage, const ConfigArgs& cfg_args,
                    const std::string& train_path, const std::string& dev_path,
                    const std::string& schema_path, const std::string& init_path,
                    const std::string& store_path, const std::string& out_path) {
    const std::string cfg = cfg_args.effective(stage);
    CorpusPtr train = open_corpus(train_path, schema_path);
    CorpusPtr dev(nullptr, &evx_corpus_free);
    if (!dev_path.empty()) dev = open_corpus(dev_path, schema_path);
    ModelPtr init(nullptr, &evx_model_free);
    if (!init_path.empty()) init = load_model(init_path);
    StorePtr store(nullptr, &evx_store_free);
    if (!store_path.empty()) {
        evx_store* s = nullptr;
        check(evx_store_load(store_path.c_str(), &s), "load silver store " + store_path);
        store.reset(s);
    }

    evx_model* out = nullptr;
    StringGuard log;
    check(evx_train(cfg.c_str(), train.get(), dev.get(), init.get(), store.get(), &out, &log.s),
          stage);
    ModelPtr model(out, &evx_model_free);
    check(evx_model_save(model.get(), out_path.c_str()), "save checkpoint " + out_path);

    std::vector<std::string> inputs{train_path};
    if (!dev_path.empty()) inputs.push_back(dev_path);
    if (!init_path.empty()) inputs.push_back(init_path);
    if (!store_path.empty()) inputs.push_back(store_path);
    manifest(out_path, stage, cfg, inputs, schema_path, log.s ? log.s : "");
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"evidence-guided document-level relation extraction"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus triple");
    ConfigArgs gen_cfg;
    gen_cfg.attach(gen);
    std::string gen_out = "data";
    gen->add_option("--out", gen_out, "output directory");

    // shared train-ish options
    struct TrainArgs {
        ConfigArgs cfg;
        std::string train, dev, schema, init, store, out;
    };
    auto add_train_options = [](CLI::App* cmd, TrainArgs& a, bool with_init, bool with_store) {
        a.cfg.attach(cmd);
        cmd->add_option("--train", a.train, "training corpus JSON")->required();
        cmd->add_option("--dev", a.dev, "development corpus JSON");
        cmd->add_option("--schema", a.schema, "relation schema file")->required();
        if (with_init) cmd->add_option("--init", a.init, "initial checkpoint");
        if (with_store) cmd->add_option("--store", a.store, "silver evidence store");
        cmd->add_option("--out", a.out, "output checkpoint path")->required();
    };

    auto* teacher = app.add_subcommand("train-teacher", "train the teacher on gold evidence");
    TrainArgs teacher_args;
    add_train_options(teacher, teacher_args, false, false);

    auto* student = app.add_subcommand("train-student", "train the student on silver evidence");
    TrainArgs student_args;
    add_train_options(student, student_args, false, true);

    auto* finetune = app.add_subcommand("finetune", "finetune a checkpoint on gold data");
    TrainArgs finetune_args;
    add_train_options(finetune, finetune_args, true, false);

    // distill
    auto* distill_cmd = app.add_subcommand("distill", "teacher-predicted evidence distributions");
    ConfigArgs distill_cfg;
    distill_cfg.attach(distill_cmd);
    std::string distill_ckpt, distill_corpus, distill_schema, distill_out;
    distill_cmd->add_option("--ckpt", distill_ckpt, "teacher checkpoint")->required();
    distill_cmd->add_option("--corpus", distill_corpus, "distant corpus JSON")->required();
    distill_cmd->add_option("--schema", distill_schema, "relation schema file")->required();
    distill_cmd->add_option("--out", distill_out, "output store path")->required();

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "extract triples with evidence");
    ConfigArgs predict_cfg;
    predict_cfg.attach(predict_cmd);
    std::string predict_ckpt, predict_corpus, predict_schema, predict_out;
    predict_cmd->add_option("--ckpt", predict_ckpt, "checkpoint")->required();
    predict_cmd->add_option("--corpus", predict_corpus, "corpus JSON")->required();
    predict_cmd->add_option("--schema", predict_schema, "relation schema file")->required();
    predict_cmd->add_option("--out", predict_out, "output predictions JSON")->required();

    // fuse
    auto* fuse_cmd = app.add_subcommand("fuse", "inference-stage fusion on dev predictions");
    ConfigArgs fuse_cfg;
    fuse_cfg.attach(fuse_cmd);
    std::string fuse_ckpt, fuse_pred, fuse_corpus, fuse_schema, fuse_out;
    fuse_cmd->add_option("--ckpt", fuse_ckpt, "checkpoint")->required();
    fuse_cmd->add_option("--pred", fuse_pred, "predictions on the dev corpus")->required();
    fuse_cmd->add_option("--corpus", fuse_corpus, "dev corpus JSON")->required();
    fuse_cmd->add_option("--schema", fuse_schema, "relation schema file")->required();
    fuse_cmd->add_option("--out", fuse_out, "output fused predictions JSON")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold");
    ConfigArgs eval_cfg;
    eval_cfg.attach(eval_cmd);
    std::string eval_pred, eval_gold, eval_train, eval_schema, eval_out;
    eval_cmd->add_option("--pred", eval_pred, "predictions JSON")->required();
    eval_cmd->add_option("--gold", eval_gold, "gold corpus JSON")->required();
    eval_cmd->add_option("--train", eval_train, "training corpus (for Ign F1)");
    eval_cmd->add_option("--schema", eval_schema, "relation schema file")->required();
    eval_cmd->add_option("--out", eval_out, "output report JSON");

    // inspect-attn
    auto* inspect_cmd = app.add_subcommand("inspect-attn", "per-token importance dump");
    ConfigArgs inspect_cfg;
    inspect_cfg.attach(inspect_cmd);
    std::string ins_ckpt, ins_corpus, ins_schema, ins_doc, ins_out;
    int ins_subject = 0, ins_object = 1;
    inspect_cmd->add_option("--ckpt", ins_ckpt, "checkpoint")->required();
    inspect_cmd->add_option("--corpus", ins_corpus, "corpus JSON")->required();
    inspect_cmd->add_option("--schema", ins_schema, "relation schema file")->required();
    inspect_cmd->add_option("--doc", ins_doc, "document id")->required();
    inspect_cmd->add_option("--head", ins_subject, "subject entity index")->required();
    inspect_cmd->add_option("--tail", ins_object, "object entity index")->required();
    inspect_cmd->add_option("--out", ins_out, "output file (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        const std::string cfg = gen_cfg.effective("gen-data");
        check(evx_gen_data(cfg.c_str(), gen_out.c_str()), "gen-data");
        std::cout << "wrote " << gen_out << "/{train,dev,distant}.json and schema.txt\n";
        return 0;
    }
    if (teacher->parsed())
        return run_train_stage("train-teacher", teacher_args.cfg, teacher_args.train,
                               teacher_args.dev, teacher_args.schema, "", "", teacher_args.out);
    if (student->parsed())
        return run_train_stage("train-student", student_args.cfg, student_args.train,
                               student_args.dev, student_args.schema, "", student_args.store,
                               student_args.out);
    if (finetune->parsed())
        return run_train_stage("finetune", finetune_args.cfg, finetune_args.train,
                               finetune_args.dev, finetune_args.schema, finetune_args.init, "",
                               finetune_args.out);

    if (distill_cmd->parsed()) {
        const std::string cfg = distill_cfg.effective("distill");
        ModelPtr model = load_model(distill_ckpt);
        CorpusPtr corpus = open_corpus(distill_corpus, distill_schema);
        evx_store* store = nullptr;
        check(evx_distill(model.get(), corpus.get(), &store), "distill");
        StorePtr guard(store, &evx_store_free);
        check(evx_store_save(store, distill_out.c_str()), "save store " + distill_out);
        manifest(distill_out, "distill", cfg, {distill_ckpt, distill_corpus}, distill_schema);
        std::cout << "wrote " << distill_out << "\n";
        return 0;
    }

    if (predict_cmd->parsed()) {
        const std::string cfg = predict_cfg.effective("predict");
        ModelPtr model = load_model(predict_ckpt);
        CorpusPtr corpus = open_corpus(predict_corpus, predict_schema);
        double threshold = 0.2;
        check(evx_config_get_double(cfg.c_str(), "evi_threshold", 0.2, &threshold),
              "read evi_threshold");
        evx_predictions* preds = nullptr;
        check(evx_predict(model.get(), corpus.get(), threshold, &preds), "predict");
        PredsPtr guard(preds, &evx_predictions_free);
        check(evx_predictions_save(preds, predict_out.c_str()), "save predictions");
        manifest(predict_out, "predict", cfg, {predict_ckpt, predict_corpus}, predict_schema);
        unsigned long long n = 0;
        evx_predictions_count(preds, &n);
        std::cout << "wrote " << predict_out << " (" << n << " triples)\n";
        return 0;
    }

    if (fuse_cmd->parsed()) {
        const std::string cfg = fuse_cfg.effective("fuse");
        ModelPtr model = load_model(fuse_ckpt);
        CorpusPtr corpus = open_corpus(fuse_corpus, fuse_schema);
        evx_predictions* preds = nullptr;
        check(evx_predictions_load(fuse_pred.c_str(), fuse_schema.c_str(), &preds),
              "load predictions " + fuse_pred);
        PredsPtr pred_guard(preds, &evx_predictions_free);
        evx_predictions* fused = nullptr;
        double tau = 0.0;
        check(evx_fuse(model.get(), preds, corpus.get(), &fused, &tau), "fuse");
        PredsPtr fused_guard(fused, &evx_predictions_free);
        check(evx_predictions_save(fused, fuse_out.c_str()), "save fused predictions");
        char extra[64];
        std::snprintf(extra, sizeof(extra), "{\"tau\": %.17g}", tau);
        manifest(fuse_out, "fuse", cfg, {fuse_ckpt, fuse_pred, fuse_corpus}, fuse_schema, extra);
        std::cout << "wrote " << fuse_out << " (tau " << tau << ")\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        const std::string cfg = eval_cfg.effective("eval");
        CorpusPtr gold = open_corpus(eval_gold, eval_schema);
        CorpusPtr train(nullptr, &evx_corpus_free);
        if (!eval_train.empty()) train = open_corpus(eval_train, eval_schema);
        evx_predictions* preds = nullptr;
        check(evx_predictions_load(eval_pred.c_str(), eval_schema.c_str(), &preds),
              "load predictions " + eval_pred);
        PredsPtr guard(preds, &evx_predictions_free);
        StringGuard report_json, report_text;
        check(evx_eval(preds, gold.get(), train.get(), &report_json.s, &report_text.s), "eval");
        std::cout << report_text.s;
        if (!eval_out.empty()) {
            write_text_file(eval_out, report_json.s);
            std::vector<std::string> inputs{eval_pred, eval_gold};
            if (!eval_train.empty()) inputs.push_back(eval_train);
            manifest(eval_out, "eval", cfg, inputs, eval_schema);
            std::cout << "wrote " << eval_out << "\n";
        }
        return 0;
    }

    if (inspect_cmd->parsed()) {
        const std::string cfg = inspect_cfg.effective("inspect-attn");
        ModelPtr model = load_model(ins_ckpt);
        CorpusPtr corpus = open_corpus(ins_corpus, ins_schema);
        StringGuard dump;
        check(evx_inspect_attn(model.get(), corpus.get(), ins_doc.c_str(), ins_subject,
                               ins_object, &dump.s),
              "inspect-attn");
        if (ins_out.empty()) {
            std::cout << dump.s;
        } else {
            write_text_file(ins_out, dump.s);
            manifest(ins_out, "inspect-attn", cfg, {ins_ckpt, ins_corpus}, ins_schema);
            std::cout << "wrote " << ins_out << "\n";
        }
        return 0;
    }
    return 0;
}
