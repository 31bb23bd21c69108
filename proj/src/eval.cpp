#include "forge/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "forge/ioutil.hpp"
#include "forge/parallel.hpp"

namespace forge {

namespace {

constexpr int kSuccessThresholds = 51;   // 0.00, 0.02, ..., 1.00
constexpr int kNormPrecThresholds = 51;  // 0.00, 0.01, ..., 0.50
constexpr double kPrecisionPixels = 20.0;

struct SequenceScore {
    double mean_iou = 0;
    double sr50 = 0;
    double sr75 = 0;
    double precision = 0;
    double success[kSuccessThresholds] = {};
    double norm_precision[kNormPrecThresholds] = {};
    std::int64_t frames = 0;
    std::int64_t missing = 0;
};

SequenceScore score_sequence(const SotGroundTruth& gt,
                             const SotPrediction& pred) {
    SequenceScore score;
    score.frames = static_cast<std::int64_t>(gt.boxes.size());
    std::int64_t over50 = 0, over75 = 0, within20 = 0;
    std::int64_t success_counts[kSuccessThresholds] = {};
    std::int64_t norm_counts[kNormPrecThresholds] = {};
    double iou_sum = 0;
    for (const auto& [frame, gt_box] : gt.boxes) {
        double overlap = 0;
        double center_err = std::numeric_limits<double>::infinity();
        double norm_err = std::numeric_limits<double>::infinity();
        const auto it = pred.boxes.find(frame);
        if (it == pred.boxes.end()) {
            ++score.missing;
        } else {
            overlap = overlap_ratio(it->second, gt_box);
            const double dx = it->second.center_x() - gt_box.center_x();
            const double dy = it->second.center_y() - gt_box.center_y();
            center_err = std::hypot(dx, dy);
            norm_err = std::hypot(dx / gt_box.width(), dy / gt_box.height());
        }
        iou_sum += overlap;
        if (overlap > 0.5) ++over50;
        if (overlap > 0.75) ++over75;
        if (center_err <= kPrecisionPixels) ++within20;
        for (int i = 0; i < kSuccessThresholds; ++i) {
            if (overlap > i * 0.02) ++success_counts[i];
        }
        for (int i = 0; i < kNormPrecThresholds; ++i) {
            if (norm_err <= i * 0.01) ++norm_counts[i];
        }
    }
    const double n = static_cast<double>(score.frames);
    score.mean_iou = iou_sum / n;
    score.sr50 = over50 / n;
    score.sr75 = over75 / n;
    score.precision = within20 / n;
    for (int i = 0; i < kSuccessThresholds; ++i)
        score.success[i] = success_counts[i] / n;
    for (int i = 0; i < kNormPrecThresholds; ++i)
        score.norm_precision[i] = norm_counts[i] / n;
    return score;
}

}  // namespace

const char* to_string(PopeSplit split) {
    switch (split) {
        case PopeSplit::Random: return "random";
        case PopeSplit::Popular: return "popular";
        case PopeSplit::Adversarial: return "adversarial";
    }
    return "unknown";
}

std::optional<PopeSplit> pope_split_from_string(const std::string& name) {
    if (name == "random") return PopeSplit::Random;
    if (name == "popular") return PopeSplit::Popular;
    if (name == "adversarial") return PopeSplit::Adversarial;
    return std::nullopt;
}

MetricReport eval_sot(const std::vector<SotPrediction>& preds,
                      const std::vector<SotGroundTruth>& gts, int workers) {
    if (gts.empty())
        throw Error(ErrorKind::Parse, "empty ground truth");
    std::map<std::string, const SotPrediction*> by_id;
    for (const auto& p : preds) {
        if (!by_id.emplace(p.sequence_id, &p).second)
            throw Error(ErrorKind::Parse,
                        "duplicate prediction for sequence " + p.sequence_id);
    }
    std::set<std::string> known;
    for (const auto& gt : gts) {
        if (gt.boxes.empty())
            throw Error(ErrorKind::Parse,
                        "ground truth for " + gt.sequence_id + " is empty");
        if (!known.insert(gt.sequence_id).second)
            throw Error(ErrorKind::Parse,
                        "duplicate ground truth sequence " + gt.sequence_id);
        if (!by_id.count(gt.sequence_id))
            throw Error(ErrorKind::Parse,
                        "no prediction entry for sequence " + gt.sequence_id);
    }
    for (const auto& p : preds) {
        if (!known.count(p.sequence_id))
            throw Error(ErrorKind::Parse,
                        "prediction for unknown sequence " + p.sequence_id);
    }

    const std::vector<SequenceScore> scores = parallel_map(
        gts.size(), workers, [&](std::size_t i) {
            return score_sequence(gts[i], *by_id.at(gts[i].sequence_id));
        });

    // Ordered reduction keeps aggregation deterministic across workers.
    MetricReport report;
    const double n = static_cast<double>(scores.size());
    double ao = 0, sr50 = 0, sr75 = 0, precision = 0;
    double success[kSuccessThresholds] = {};
    double norm_prec[kNormPrecThresholds] = {};
    std::int64_t frames = 0, missing = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const SequenceScore& s = scores[i];
        ao += s.mean_iou;
        sr50 += s.sr50;
        sr75 += s.sr75;
        precision += s.precision;
        for (int j = 0; j < kSuccessThresholds; ++j) success[j] += s.success[j];
        for (int j = 0; j < kNormPrecThresholds; ++j)
            norm_prec[j] += s.norm_precision[j];
        frames += s.frames;
        missing += s.missing;
        report.per_category[gts[i].sequence_id] = s.mean_iou;
    }
    double success_auc = 0;
    for (int j = 0; j < kSuccessThresholds; ++j)
        success_auc += success[j] / n;
    success_auc /= kSuccessThresholds;
    double norm_prec_auc = 0;
    for (int j = 0; j < kNormPrecThresholds; ++j)
        norm_prec_auc += norm_prec[j] / n;
    norm_prec_auc /= kNormPrecThresholds;

    report.metrics["AO"] = ao / n;
    report.metrics["SR@0.50"] = sr50 / n;
    report.metrics["SR@0.75"] = sr75 / n;
    report.metrics["Success"] = success_auc;
    report.metrics["P"] = precision / n;
    report.metrics["P_norm"] = norm_prec_auc;
    report.counts["sequences"] = static_cast<std::int64_t>(scores.size());
    report.counts["frames"] = frames;
    report.counts["missing_prediction_frames"] = missing;
    return report;
}

MetricReport eval_choice_benchmark(const std::vector<ChoiceRecord>& records) {
    if (records.empty())
        throw Error(ErrorKind::Parse, "no choice records");
    static const std::vector<std::string> kCategories = {"OL", "PPR", "FR",
                                                         "IR", "FP"};
    std::set<std::string> ids;
    std::map<std::string, std::int64_t> total, correct;
    for (const auto& r : records) {
        if (!ids.insert(r.question_id).second)
            throw Error(ErrorKind::Parse,
                        "duplicate question_id " + r.question_id);
        if (std::find(kCategories.begin(), kCategories.end(), r.category) ==
            kCategories.end())
            throw Error(ErrorKind::Parse,
                        "unknown category '" + r.category + "'");
        ++total[r.category];
        if (r.predicted == r.gold) ++correct[r.category];
    }
    MetricReport report;
    double sum = 0;
    int present = 0;
    for (const auto& category : kCategories) {
        const auto it = total.find(category);
        if (it == total.end()) continue;
        const double acc =
            static_cast<double>(correct[category]) / it->second;
        report.per_category[category] = acc;
        report.counts[category] = it->second;
        sum += acc;
        ++present;
    }
    report.metrics["Avg"] = sum / present;
    report.counts["records"] = static_cast<std::int64_t>(records.size());
    report.counts["empty_categories"] =
        static_cast<std::int64_t>(kCategories.size()) - present;
    return report;
}

MetricReport eval_pope(const std::vector<PopeRecord>& records) {
    if (records.empty())
        throw Error(ErrorKind::Parse, "no pope records");
    MetricReport report;
    for (const PopeSplit split :
         {PopeSplit::Random, PopeSplit::Popular, PopeSplit::Adversarial}) {
        std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
        for (const auto& r : records) {
            if (r.split != split) continue;
            const bool pred_yes = r.predicted == PopeAnswer::Yes;
            const bool gold_yes = r.gold == PopeAnswer::Yes;
            if (pred_yes && gold_yes) ++tp;
            else if (pred_yes && !gold_yes) ++fp;
            else if (!pred_yes && gold_yes) ++fn;
            else ++tn;
        }
        const std::int64_t n = tp + tn + fp + fn;
        if (n == 0) continue;
        const std::string prefix = std::string(to_string(split)) + ".";
        const double precision = (tp + fp) > 0
                                     ? static_cast<double>(tp) / (tp + fp)
                                     : 0.0;
        const double recall =
            (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double f1 = (precision + recall) > 0
                              ? 2 * precision * recall / (precision + recall)
                              : 0.0;  // 0 by convention
        report.metrics[prefix + "accuracy"] =
            static_cast<double>(tp + tn) / n;
        report.metrics[prefix + "precision"] = precision;
        report.metrics[prefix + "recall"] = recall;
        report.metrics[prefix + "f1"] = f1;
        report.metrics[prefix + "yes_rate"] =
            static_cast<double>(tp + fp) / n;
        report.counts[prefix + "n"] = n;
        if (precision + recall == 0)
            report.counts[prefix + "degenerate_f1"] = 1;
    }
    return report;
}

ScoredResponses score_response_file(const std::string& path,
                                    const std::vector<SotGroundTruth>& gts,
                                    ParseMode mode) {
    std::set<std::string> known;
    for (const auto& gt : gts) known.insert(gt.sequence_id);

    ScoredResponses out;
    std::set<std::string> seen;
    for_each_jsonl_line(path, [&](std::size_t line_no, const std::string& line) {
        Json obj;
        try {
            obj = Json::parse(line);
        } catch (const Json::parse_error& e) {
            std::ostringstream os;
            os << path << ":" << line_no << ": " << e.what();
            throw Error(ErrorKind::Parse, os.str());
        }
        if (!obj.contains("sequence_id") || !obj.contains("response"))
            throw Error(ErrorKind::Parse,
                        path + ": lines need sequence_id and response fields");
        const std::string id = obj["sequence_id"].get<std::string>();
        if (!known.count(id))
            throw Error(ErrorKind::Parse,
                        path + ": prediction for unknown sequence " + id);
        if (!seen.insert(id).second)
            throw Error(ErrorKind::Parse,
                        path + ": duplicate response for sequence " + id);
        const int width = obj.value("width", 0);
        const int height = obj.value("height", 0);
        if (width <= 0 || height <= 0)
            throw Error(ErrorKind::Parse,
                        path + ": responses need positive width/height");

        SotPrediction pred;
        pred.sequence_id = id;
        const std::string response = obj["response"].get<std::string>();
        const ParsedTrajectories parsed = parse_response(response, mode);
        if (!parsed.ok() || parsed.tracklets.empty()) {
            std::ostringstream os;
            os << path << ":" << line_no << ": sequence " << id
               << ": response not parseable; scoring as empty prediction";
            out.diagnostics.push_back(os.str());
        } else {
            // The queried subject is the lowest id by convention.
            const ParsedTracklet* best = &parsed.tracklets.front();
            for (const auto& t : parsed.tracklets)
                if (t.id < best->id) best = &t;
            for (const auto& [frame, nb] : best->boxes)
                pred.boxes[frame] = denormalize_box(nb, width, height);
        }
        out.predictions.push_back(std::move(pred));
    });

    // Sequences without a response line still need a (empty) prediction
    // entry so eval_sot can penalize them.
    for (const auto& gt : gts) {
        if (!seen.count(gt.sequence_id)) {
            out.diagnostics.push_back("no response for sequence " +
                                      gt.sequence_id +
                                      "; scoring as empty prediction");
            out.predictions.push_back({gt.sequence_id, {}});
        }
    }
    return out;
}

std::optional<char> extract_choice(const std::string& response,
                                   const std::map<char, std::string>& options) {
    std::size_t i = 0;
    while (i < response.size() && std::isspace(static_cast<unsigned char>(response[i])))
        ++i;
    if (i < response.size()) {
        const char c = static_cast<char>(
            std::toupper(static_cast<unsigned char>(response[i])));
        if (c >= 'A' && c <= 'E') {
            const bool delimited =
                i + 1 >= response.size() ||
                !std::isalnum(static_cast<unsigned char>(response[i + 1]));
            if (delimited) return c;
        }
    }
    // Fall back to option-text matching; require a unique hit.
    std::optional<char> match;
    for (const auto& [letter, text] : options) {
        if (text.empty()) continue;
        if (response.find(text) != std::string::npos) {
            if (match) return std::nullopt;
            match = letter;
        }
    }
    return match;
}

std::optional<PopeAnswer> extract_pope_answer(const std::string& response) {
    std::string lower;
    lower.reserve(response.size());
    for (char c : response)
        lower.push_back(
            static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    const auto find_word = [&](const std::string& word) {
        std::size_t pos = 0;
        while ((pos = lower.find(word, pos)) != std::string::npos) {
            const bool left_ok =
                pos == 0 ||
                !std::isalpha(static_cast<unsigned char>(lower[pos - 1]));
            const std::size_t end = pos + word.size();
            const bool right_ok =
                end >= lower.size() ||
                !std::isalpha(static_cast<unsigned char>(lower[end]));
            if (left_ok && right_ok) return pos;
            pos = end;
        }
        return std::string::npos;
    };
    const std::size_t yes_pos = find_word("yes");
    const std::size_t no_pos = find_word("no");
    if (yes_pos == std::string::npos && no_pos == std::string::npos)
        return std::nullopt;
    if (no_pos == std::string::npos || yes_pos < no_pos)
        return PopeAnswer::Yes;
    return PopeAnswer::No;
}

}  // namespace forge
