#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/core.hpp"
#include "forge/trajgrammar.hpp"

namespace forge {

struct SotPrediction {
    std::string sequence_id;
    std::map<int, BoundingBox> boxes;  // frame index -> pixel-space box
};

struct SotGroundTruth {
    std::string sequence_id;
    int width = 0;
    int height = 0;
    std::map<int, BoundingBox> boxes;
};

struct ChoiceRecord {
    std::string question_id;
    std::string category;  // OL, PPR, FR, IR, FP
    char predicted = '?';
    char gold = '?';
};

enum class PopeAnswer { Yes, No };
enum class PopeSplit { Random, Popular, Adversarial };

struct PopeRecord {
    std::string question_id;
    PopeAnswer predicted = PopeAnswer::No;
    PopeAnswer gold = PopeAnswer::No;
    PopeSplit split = PopeSplit::Random;
};

const char* to_string(PopeSplit split);
std::optional<PopeSplit> pope_split_from_string(const std::string& name);

// Single-object tracking metrics: AO, SR@0.50, SR@0.75, Success (AUC over
// 51 IoU thresholds 0.00..1.00), P (center error <= 20px) and P_norm (AUC
// over box-normalized center-error thresholds 0..0.5 step 0.01). Frames
// without a prediction score IoU 0 and infinite center error. Scoring is
// per sequence, then averaged over sequences in input order.
MetricReport eval_sot(const std::vector<SotPrediction>& preds,
                      const std::vector<SotGroundTruth>& gts,
                      int workers = 1);

// Per-category accuracy plus the unweighted mean over the five categories;
// empty categories are excluded and flagged in the counts.
MetricReport eval_choice_benchmark(const std::vector<ChoiceRecord>& records);

// POPE scoring per split: accuracy, F1 with yes as the positive class
// (0 by convention when precision+recall is 0), and yes-rate.
MetricReport eval_pope(const std::vector<PopeRecord>& records);

// Bridges trajectory-formatted response files to eval_sot. Unparseable
// responses become empty predictions with a diagnostic, never aborting
// the run.
struct ScoredResponses {
    std::vector<SotPrediction> predictions;
    std::vector<std::string> diagnostics;
};
ScoredResponses score_response_file(const std::string& path,
                                    const std::vector<SotGroundTruth>& gts,
                                    ParseMode mode);

// Lenient mapping of free-form response text onto a choice letter; returns
// nothing when no option matches.
std::optional<char> extract_choice(const std::string& response,
                                   const std::map<char, std::string>& options);

std::optional<PopeAnswer> extract_pope_answer(const std::string& response);

}  // namespace forge
