#include "mmlm/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mmlm/base64.hpp"
#include "mmlm/errors.hpp"
#include "mmlm/png_io.hpp"

namespace mmlm::eval {

using nlohmann::ordered_json;

namespace {

uint64_t hash_bytes(uint64_t h, std::string_view s) {
    for (unsigned char b : s) h = derive_seed(h, static_cast<uint64_t>(b) + 1);
    return h;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Parses every non-blank line with "line N: " error context.
template <class Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
    auto lines = read_lines(path);
    for (size_t i = 0; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        try {
            fn(nlohmann::json::parse(lines[i]));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
}

std::string need_string(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string())
        throw DataError(std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
}

ImageTensor image_field(const nlohmann::json& j, const char* key) {
    return decode_png(base64::decode(need_string(j, key)));
}

std::vector<std::string> string_array(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array())
        throw DataError(std::string("field '") + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& v : j[key]) {
        if (!v.is_string()) throw DataError(std::string("field '") + key + "' must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::vector<ImageTensor> image_array(const nlohmann::json& j, const char* key) {
    std::vector<ImageTensor> out;
    for (const auto& s : string_array(j, key)) out.push_back(decode_png(base64::decode(s)));
    return out;
}

// k distinct demonstration indices for query i, drawn without replacement.
std::vector<size_t> demo_indices(size_t n, size_t k, size_t query, uint64_t seed) {
    if (k + 1 > n) throw DataError("not enough examples to sample demonstrations");
    std::vector<size_t> pool;
    pool.reserve(n - 1);
    for (size_t j = 0; j < n; ++j)
        if (j != query) pool.push_back(j);
    Rng rng(derive_seed(seed, 0x64656d6f, query));
    std::vector<size_t> out;
    for (size_t j = 0; j < k; ++j) {
        const size_t pick = j + static_cast<size_t>(rng.below(pool.size() - j));
        std::swap(pool[j], pool[pick]);
        out.push_back(pool[j]);
    }
    return out;
}

double mean_metric(const std::vector<EvalRecord>& records, const std::string& key) {
    double sum = 0;
    for (const auto& r : records) {
        auto it = std::find_if(r.metrics.begin(), r.metrics.end(),
                               [&](const auto& m) { return m.first == key; });
        if (it == r.metrics.end()) throw DataError("record is missing metric " + key);
        sum += it->second;
    }
    return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
}

} // namespace

double RandomScoreModel::score(const MultimodalDocument& prompt, const std::string& continuation) {
    uint64_t h = hash_bytes(seed_, prompts::render_debug(prompt));
    h = derive_seed(h, 0x7c);
    h = hash_bytes(h, continuation);
    return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

std::string RandomScoreModel::generate(const MultimodalDocument& prompt, size_t max_new,
                                       size_t beam) {
    (void)max_new;
    (void)beam;
    uint64_t h = hash_bytes(seed_, prompts::render_debug(prompt));
    std::ostringstream out;
    out << "mock-" << std::hex << splitmix64(h);
    return out.str();
}

std::string RandomScoreModel::generate_constrained(const MultimodalDocument& prompt,
                                                   const std::vector<std::string>& labels,
                                                   size_t beam) {
    (void)beam;
    if (labels.empty()) throw DataError("label set is empty");
    uint64_t h = hash_bytes(seed_, prompts::render_debug(prompt));
    return labels[splitmix64(h) % labels.size()];
}

void RavenInstance::validate() const {
    if (given.size() != 3 && given.size() != 4 && given.size() != 8)
        throw DataError("matrix tasks give 3, 4, or 8 images, got " + std::to_string(given.size()));
    if (candidates.size() != 6)
        throw DataError("matrix tasks need exactly 6 candidates, got " +
                        std::to_string(candidates.size()));
    if (answer_index < 0 || answer_index >= 6)
        throw DataError("answer index out of range: " + std::to_string(answer_index));
}

std::vector<double> raven_scores(const RavenInstance& inst, ScoreModel& model, RavenOptions opts) {
    inst.validate();
    const std::string yes = opts.full_word ? "Yes" : "Y";
    std::vector<double> scores;
    scores.reserve(6);
    for (const auto& cand : inst.candidates)
        scores.push_back(model.score(prompts::raven_prompt(inst.given, cand), yes));
    return scores;
}

int raven_predict(const RavenInstance& inst, ScoreModel& model, RavenOptions opts) {
    auto scores = raven_scores(inst, model, opts);
    size_t best = 0;
    for (size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = c;
    return static_cast<int>(best);
}

size_t score_options(ScoreModel& model, const MultimodalDocument& prompt,
                     std::span<const std::string> options) {
    if (options.empty()) throw DataError("option set is empty");
    size_t best = 0;
    double best_score = 0;
    for (size_t i = 0; i < options.size(); ++i) {
        const double s = model.score(prompt, " " + options[i]);
        if (i == 0 || s > best_score) {
            best = i;
            best_score = s;
        }
    }
    return best;
}

CotResult cot_two_stage(const ImageTensor& image, ScoreModel& model, size_t max_new) {
    CotResult res;
    res.rationale = model.generate(prompts::cot_stage1_prompt(image), max_new, 1);
    const std::vector<std::string> options{"positive", "negative"};
    auto stage2 = prompts::cot_stage2_prompt(res.rationale);
    res.answer = options[score_options(model, stage2, options)];
    return res;
}

std::string classify_constrained(const ImageTensor& image, const std::vector<std::string>& labels,
                                 ScoreModel& model, size_t beam) {
    if (labels.empty()) throw DataError("label set is empty");
    return model.generate_constrained(prompts::photo_label_prompt(image), labels, beam);
}

std::string classify_open(const ImageTensor& image, ScoreModel& model, size_t beam,
                          size_t max_new) {
    return model.generate(prompts::photo_label_prompt(image), max_new, beam);
}

std::string classify_with_descriptions(const ImageTensor& image,
                                       std::span<const prompts::DescribedOption> options,
                                       const std::string& general_category, ScoreModel& model,
                                       bool with_descriptions) {
    for (size_t i = 0; i < options.size(); ++i)
        for (size_t j = i + 1; j < options.size(); ++j)
            if (options[i].name == options[j].name)
                throw DataError("duplicate option name: " + options[i].name);
    auto prompt = prompts::description_prompt(image, options, general_category, with_descriptions);
    std::vector<std::string> names;
    names.reserve(options.size());
    for (const auto& opt : options) names.push_back(opt.name);
    return names[score_options(model, prompt, names)];
}

std::string normalize_answer(const std::string& s) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

bool exact_match(const std::string& pred, const std::string& gold) {
    return normalize_answer(pred) == normalize_answer(gold);
}

double token_f1(const std::string& pred, const std::string& gold) {
    auto split = [](const std::string& s) {
        std::vector<std::string> toks;
        std::istringstream in(normalize_answer(s));
        std::string t;
        while (in >> t) toks.push_back(t);
        return toks;
    };
    auto p = split(pred);
    auto g = split(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::map<std::string, size_t> counts;
    for (const auto& t : g) counts[t]++;
    size_t common = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            it->second--;
            common++;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2 * precision * recall / (precision + recall);
}

double roc_auc(std::span<const double> scores, std::span<const uint8_t> labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    size_t pos = 0;
    for (uint8_t l : labels) pos += l ? 1 : 0;
    const size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw DataError("ROC AUC needs both classes present");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // average ranks across ties, 1-based
    std::vector<double> rank(scores.size());
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) j++;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double pos_rank_sum = 0;
    for (size_t k = 0; k < labels.size(); ++k)
        if (labels[k]) pos_rank_sum += rank[k];
    const double p = static_cast<double>(pos);
    const double n = static_cast<double>(neg);
    return (pos_rank_sum - p * (p + 1) / 2.0) / (p * n);
}

std::string EvalReport::to_json() const {
    ordered_json j;
    j["task"] = task;
    j["seed"] = seed;
    j["count"] = records.size();
    ordered_json agg = ordered_json::object();
    for (const auto& [k, v] : aggregate) agg[k] = v;
    j["aggregate"] = agg;
    ordered_json recs = ordered_json::array();
    for (const auto& r : records) {
        ordered_json rec;
        rec["id"] = r.id;
        rec["prediction"] = r.prediction;
        rec["reference"] = r.reference;
        ordered_json m = ordered_json::object();
        for (const auto& [k, v] : r.metrics) m[k] = v;
        rec["metrics"] = m;
        recs.push_back(rec);
    }
    j["records"] = recs;
    return j.dump(2);
}

std::vector<CaptionExample> load_caption_jsonl(const std::string& path) {
    std::vector<CaptionExample> out;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
        out.push_back({need_string(j, "id"), image_field(j, "image_png_b64"),
                       need_string(j, "caption")});
    });
    return out;
}

std::vector<VqaExample> load_vqa_jsonl(const std::string& path) {
    std::vector<VqaExample> out;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
        auto answers = string_array(j, "answers");
        if (answers.empty()) throw DataError("field 'answers' must not be empty");
        out.push_back({need_string(j, "id"), image_field(j, "image_png_b64"),
                       need_string(j, "question"), std::move(answers)});
    });
    return out;
}

std::vector<LabelExample> load_label_jsonl(const std::string& path) {
    std::vector<LabelExample> out;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
        out.push_back(
            {need_string(j, "id"), image_field(j, "image_png_b64"), need_string(j, "label")});
    });
    return out;
}

std::vector<WebsrcExample> load_websrc_jsonl(const std::string& path) {
    std::vector<WebsrcExample> out;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
        WebsrcExample ex;
        ex.id = need_string(j, "id");
        if (j.contains("image_png_b64")) ex.image = image_field(j, "image_png_b64");
        ex.web_text = need_string(j, "web_text");
        ex.question = need_string(j, "question");
        ex.answer = need_string(j, "answer");
        out.push_back(std::move(ex));
    });
    return out;
}

std::vector<DescribedExample> load_described_jsonl(const std::string& path) {
    std::vector<DescribedExample> out;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
        DescribedExample ex;
        ex.id = need_string(j, "id");
        ex.image = image_field(j, "image_png_b64");
        ex.label = need_string(j, "label");
        ex.general_category = need_string(j, "general_category");
        if (!j.contains("options") || !j["options"].is_array())
            throw DataError("field 'options' must be an array");
        for (const auto& o : j["options"])
            ex.options.push_back({need_string(o, "name"), need_string(o, "description")});
        out.push_back(std::move(ex));
    });
    return out;
}

std::vector<RavenInstance> load_raven_jsonl(const std::string& path) {
    std::vector<RavenInstance> out;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
        RavenInstance inst;
        inst.id = need_string(j, "id");
        inst.given = image_array(j, "given_images");
        inst.candidates = image_array(j, "candidate_images");
        if (!j.contains("answer_index") || !j["answer_index"].is_number_integer())
            throw DataError("field 'answer_index' must be an integer");
        inst.answer_index = j["answer_index"].get<int>();
        inst.validate();
        out.push_back(std::move(inst));
    });
    return out;
}

std::vector<LangExample> load_lang_jsonl(const std::string& path) {
    std::vector<LangExample> out;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
        LangExample ex;
        ex.id = need_string(j, "id");
        ex.prompt = need_string(j, "prompt");
        ex.options = string_array(j, "options");
        if (ex.options.empty()) throw DataError("field 'options' must not be empty");
        if (!j.contains("answer_index") || !j["answer_index"].is_number_unsigned())
            throw DataError("field 'answer_index' must be a non-negative integer");
        ex.answer_index = j["answer_index"].get<size_t>();
        if (ex.answer_index >= ex.options.size())
            throw DataError("answer_index out of range");
        out.push_back(std::move(ex));
    });
    return out;
}

EvalReport run_caption(std::span<const CaptionExample> data, ScoreModel& model, EvalOptions opts) {
    const size_t beam = opts.beam ? opts.beam : 5;
    const size_t max_new = opts.max_new ? opts.max_new : 32;
    EvalReport rep;
    rep.task = "caption";
    rep.seed = opts.seed;
    for (size_t i = 0; i < data.size(); ++i) {
        std::vector<prompts::CaptionDemo> demos;
        if (opts.shots > 0)
            for (size_t d : demo_indices(data.size(), opts.shots, i, opts.seed))
                demos.push_back({data[d].image, data[d].caption});
        const std::string pred =
            model.generate(prompts::caption_prompt(demos, data[i].image), max_new, beam);
        EvalRecord rec{data[i].id, pred, data[i].caption, {}};
        rec.metrics.emplace_back("exact_match", exact_match(pred, data[i].caption) ? 1.0 : 0.0);
        rec.metrics.emplace_back("token_f1", token_f1(pred, data[i].caption));
        rep.records.push_back(std::move(rec));
    }
    rep.aggregate.emplace_back("exact_match", mean_metric(rep.records, "exact_match"));
    rep.aggregate.emplace_back("token_f1", mean_metric(rep.records, "token_f1"));
    return rep;
}

EvalReport run_vqa(std::span<const VqaExample> data, ScoreModel& model, EvalOptions opts) {
    const size_t beam = opts.beam ? opts.beam : 1;
    const size_t max_new = opts.max_new ? opts.max_new : 16;
    EvalReport rep;
    rep.task = "vqa";
    rep.seed = opts.seed;
    for (size_t i = 0; i < data.size(); ++i) {
        std::vector<prompts::VqaDemo> demos;
        if (opts.shots > 0)
            for (size_t d : demo_indices(data.size(), opts.shots, i, opts.seed))
                demos.push_back({data[d].image, data[d].question, data[d].answers.front()});
        const std::string pred = model.generate(
            prompts::vqa_prompt(demos, data[i].image, data[i].question), max_new, beam);
        double em = 0, f1 = 0;
        std::string ref;
        for (const auto& a : data[i].answers) {
            em = std::max(em, exact_match(pred, a) ? 1.0 : 0.0);
            f1 = std::max(f1, token_f1(pred, a));
            if (!ref.empty()) ref += " | ";
            ref += a;
        }
        EvalRecord rec{data[i].id, pred, ref, {}};
        rec.metrics.emplace_back("exact_match", em);
        rec.metrics.emplace_back("token_f1", f1);
        rep.records.push_back(std::move(rec));
    }
    rep.aggregate.emplace_back("exact_match", mean_metric(rep.records, "exact_match"));
    rep.aggregate.emplace_back("token_f1", mean_metric(rep.records, "token_f1"));
    return rep;
}

EvalReport run_sst2(std::span<const LabelExample> data, ScoreModel& model, EvalOptions opts) {
    const std::vector<std::string> options{"positive", "negative"};
    EvalReport rep;
    rep.task = "sst2";
    rep.seed = opts.seed;
    for (const auto& ex : data) {
        const size_t pick = score_options(model, prompts::sentiment_prompt(ex.image), options);
        EvalRecord rec{ex.id, options[pick], ex.label, {}};
        rec.metrics.emplace_back("correct", exact_match(options[pick], ex.label) ? 1.0 : 0.0);
        rep.records.push_back(std::move(rec));
    }
    rep.aggregate.emplace_back("accuracy", mean_metric(rep.records, "correct"));
    return rep;
}

EvalReport run_hateful(std::span<const LabelExample> data, ScoreModel& model, EvalOptions opts) {
    const std::vector<std::string> options{"yes", "no"};
    EvalReport rep;
    rep.task = "hateful";
    rep.seed = opts.seed;
    std::vector<double> yes_scores;
    std::vector<uint8_t> labels;
    for (const auto& ex : data) {
        auto prompt = prompts::hate_speech_prompt(ex.image);
        const double yes = model.score(prompt, " yes");
        const double no = model.score(prompt, " no");
        const size_t pick = yes >= no ? 0 : 1;
        EvalRecord rec{ex.id, options[pick], ex.label, {}};
        rec.metrics.emplace_back("correct", exact_match(options[pick], ex.label) ? 1.0 : 0.0);
        rec.metrics.emplace_back("yes_score", yes);
        rep.records.push_back(std::move(rec));
        yes_scores.push_back(yes);
        labels.push_back(exact_match(ex.label, "yes") ? 1 : 0);
    }
    rep.aggregate.emplace_back("accuracy", mean_metric(rep.records, "correct"));
    rep.aggregate.emplace_back("roc_auc", roc_auc(yes_scores, labels));
    return rep;
}

EvalReport run_websrc(std::span<const WebsrcExample> data, ScoreModel& model, EvalOptions opts) {
    const size_t beam = opts.beam ? opts.beam : 1;
    const size_t max_new = opts.max_new ? opts.max_new : 32;
    EvalReport rep;
    rep.task = "websrc";
    rep.seed = opts.seed;
    for (const auto& ex : data) {
        auto prompt =
            prompts::websrc_prompt(ex.image ? &*ex.image : nullptr, ex.web_text, ex.question);
        const std::string pred = model.generate(prompt, max_new, beam);
        EvalRecord rec{ex.id, pred, ex.answer, {}};
        rec.metrics.emplace_back("exact_match", exact_match(pred, ex.answer) ? 1.0 : 0.0);
        rec.metrics.emplace_back("token_f1", token_f1(pred, ex.answer));
        rep.records.push_back(std::move(rec));
    }
    rep.aggregate.emplace_back("exact_match", mean_metric(rep.records, "exact_match"));
    rep.aggregate.emplace_back("token_f1", mean_metric(rep.records, "token_f1"));
    return rep;
}

EvalReport run_imagenet(std::span<const LabelExample> data, ScoreModel& model, EvalOptions opts) {
    const size_t beam = opts.beam ? opts.beam : 2;
    const size_t max_new = opts.max_new ? opts.max_new : 32;
    std::vector<std::string> labels;
    for (const auto& ex : data) labels.push_back(ex.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

    EvalReport rep;
    rep.task = "imagenet";
    rep.seed = opts.seed;
    for (const auto& ex : data) {
        const std::string pred = opts.constrained
                                     ? classify_constrained(ex.image, labels, model, beam)
                                     : classify_open(ex.image, model, beam, max_new);
        EvalRecord rec{ex.id, pred, ex.label, {}};
        rec.metrics.emplace_back("correct", exact_match(pred, ex.label) ? 1.0 : 0.0);
        rep.records.push_back(std::move(rec));
    }
    rep.aggregate.emplace_back("accuracy", mean_metric(rep.records, "correct"));
    return rep;
}

EvalReport run_cub(std::span<const DescribedExample> data, ScoreModel& model, EvalOptions opts) {
    EvalReport rep;
    rep.task = "cub";
    rep.seed = opts.seed;
    for (const auto& ex : data) {
        const std::string pred = classify_with_descriptions(
            ex.image, ex.options, ex.general_category, model, opts.with_descriptions);
        EvalRecord rec{ex.id, pred, ex.label, {}};
        rec.metrics.emplace_back("correct", pred == ex.label ? 1.0 : 0.0);
        rep.records.push_back(std::move(rec));
    }
    rep.aggregate.emplace_back("accuracy", mean_metric(rep.records, "correct"));
    return rep;
}

EvalReport run_raven(std::span<const RavenInstance> data, ScoreModel& model, EvalOptions opts) {
    EvalReport rep;
    rep.task = "raven";
    rep.seed = opts.seed;
    RavenOptions ropts;
    ropts.full_word = opts.full_word_yes;
    for (const auto& inst : data) {
        const int pred = raven_predict(inst, model, ropts);
        EvalRecord rec{inst.id, std::to_string(pred), std::to_string(inst.answer_index), {}};
        rec.metrics.emplace_back("correct", pred == inst.answer_index ? 1.0 : 0.0);
        rep.records.push_back(std::move(rec));
    }
    rep.aggregate.emplace_back("accuracy", mean_metric(rep.records, "correct"));
    return rep;
}

EvalReport run_lang(std::span<const LangExample> data, ScoreModel& model, EvalOptions opts) {
    EvalReport rep;
    rep.task = "lang";
    rep.seed = opts.seed;
    for (const auto& ex : data) {
        MultimodalDocument prompt;
        prompt.doc_id = ex.id;
        prompt.add_text(ex.prompt);
        const size_t pick = score_options(model, prompt, ex.options);
        EvalRecord rec{ex.id, ex.options[pick], ex.options[ex.answer_index], {}};
        rec.metrics.emplace_back("correct", pick == ex.answer_index ? 1.0 : 0.0);
        rep.records.push_back(std::move(rec));
    }
    rep.aggregate.emplace_back("accuracy", mean_metric(rep.records, "correct"));
    return rep;
}

EvalReport run_task(const std::string& task, const std::string& data_path, ScoreModel& model,
                    EvalOptions opts) {
    if (task == "caption") {
        auto data = load_caption_jsonl(data_path);
        return run_caption(data, model, opts);
    }
    if (task == "vqa") {
        auto data = load_vqa_jsonl(data_path);
        return run_vqa(data, model, opts);
    }
    if (task == "sst2") {
        auto data = load_label_jsonl(data_path);
        return run_sst2(data, model, opts);
    }
    if (task == "hateful") {
        auto data = load_label_jsonl(data_path);
        return run_hateful(data, model, opts);
    }
    if (task == "websrc") {
        auto data = load_websrc_jsonl(data_path);
        return run_websrc(data, model, opts);
    }
    if (task == "imagenet") {
        auto data = load_label_jsonl(data_path);
        return run_imagenet(data, model, opts);
    }
    if (task == "cub") {
        auto data = load_described_jsonl(data_path);
        return run_cub(data, model, opts);
    }
    if (task == "raven") {
        auto data = load_raven_jsonl(data_path);
        return run_raven(data, model, opts);
    }
    if (task == "lang") {
        auto data = load_lang_jsonl(data_path);
        return run_lang(data, model, opts);
    }
    throw UsageError("unknown task: " + task);
}

} // namespace mmlm::eval
