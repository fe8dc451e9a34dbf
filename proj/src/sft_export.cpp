#include "cfeg/sft_export.hpp"

#include <atomic>

#include "cfeg/common.hpp"
#include "cfeg/digest.hpp"

namespace cfeg::sft {

using nlohmann::json;

json SftExample::to_json() const {
    return {{"instruction", instruction},
            {"input", input},
            {"output", output},
            {"meta",
             {{"dialogue_id", dialogue_id},
              {"prompt_variant", "P2kgE"},
              {"target_variant", templates::to_string(target_variant)},
              {"seed", seed},
              {"demo_ids", demo_ids}}}};
}

std::vector<SftExample> build_examples(const ExportInputs& in, const ExportOptions& opts) {
    if (!in.dialogues || !in.demo_pool || !in.causes || !in.bundles || !in.valence) {
        throw PreconditionError("export_sft: incomplete inputs");
    }
    const auto& dialogues = *in.dialogues;
    std::string missing;
    for (const auto& d : dialogues) {
        if (!in.causes->count(d.id) || !in.bundles->count(d.id)) missing += (missing.empty() ? "" : ", ") + d.id;
    }
    if (!missing.empty()) throw PreconditionError("export_sft: missing cause or knowledge for: " + missing);

    std::vector<SftExample> out(dialogues.size());
    std::vector<std::string> errors(dialogues.size());
    std::atomic<bool> failed{false};
    const auto n = static_cast<std::ptrdiff_t>(dialogues.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& d = dialogues[static_cast<std::size_t>(i)];
        try {
            const auto& cause = in.causes->at(d.id);
            const auto knowledge = knowledge::verbalize(in.bundles->at(d.id), opts.template_options.pronoun);
            const auto demos = templates::sample_demonstrations(*in.demo_pool, d.id, opts.seed);
            const auto parts = templates::prompt_parts(templates::PromptVariant::P2kgE, d, knowledge, &demos);
            templates::TargetFields fields;
            fields.emotion = d.emotion;
            fields.cause_text = cause.span.text;
            auto [listener, intent] = templates::listener_fields(d.emotion, *in.valence);
            fields.listener_emotion = listener;
            fields.intent = intent;
            fields.response = d.gold_response;
            auto& ex = out[static_cast<std::size_t>(i)];
            ex.instruction = parts.instruction;
            ex.input = parts.input;
            ex.output = templates::render_target(opts.target_variant, fields, opts.template_options).rendered;
            ex.dialogue_id = d.id;
            ex.demo_ids = demos.dialogue_ids;
            ex.target_variant = opts.target_variant;
            ex.seed = opts.seed;
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = d.id + ": " + e.what();
            failed = true;
        }
    }
    if (failed) {
        for (const auto& e : errors) {
            if (!e.empty()) throw PreconditionError("export_sft: " + e);
        }
    }
    return out;
}

json SftManifest::to_json(const ExportOptions& opts) const {
    return {{"records", records},
            {"digest", "sha256:" + digest},
            {"seed", opts.seed},
            {"prompt_variant", "P2kgE"},
            {"target_variant", templates::to_string(opts.target_variant)},
            {"literal_templates", opts.template_options.literal},
            {"pronoun", opts.template_options.pronoun.subject},
            {"schema", {"instruction", "input", "output", "meta"}},
            {"prompt", "instruction + \" \" + input"},
            {"trainer",
             {{"learning_rate", opts.trainer.learning_rate},
              {"lora_rank", opts.trainer.lora_rank},
              {"batch_size", opts.trainer.batch_size},
              {"loss", "negative log-likelihood of output tokens conditioned on the prompt and preceding output tokens"}}}};
}

std::filesystem::path manifest_path(const std::filesystem::path& records) {
    auto p = records;
    p += ".manifest.json";
    return p;
}

SftManifest export_sft(const ExportInputs& in, const ExportOptions& opts, const std::filesystem::path& path) {
    const auto examples = build_examples(in, opts);
    std::string body;
    for (const auto& ex : examples) {
        body += ex.to_json().dump();
        body += '\n';
    }
    write_file_atomic(path, body);
    SftManifest m{examples.size(), sha256_hex(body)};
    write_file_atomic(manifest_path(path), m.to_json(opts).dump(2) + "\n");
    return m;
}

}  // namespace cfeg::sft
