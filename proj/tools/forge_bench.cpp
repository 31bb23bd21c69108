// Benchmark comparing the serial reference against the OpenMP kernels on
// the two data-parallel hot paths: corpus record construction and
// per-sequence tracking evaluation. Digests of both outputs are compared,
// so this doubles as an end-to-end determinism check across worker counts.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forge/digest.hpp"
#include "forge/eval.hpp"
#include "forge/parallel.hpp"
#include "forge/pipeline.hpp"
#include "forge/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double run_seconds(const std::function<void()>& fn) {
    const auto start = Clock::now();
    fn();
    return std::chrono::duration<double>(Clock::now() - start).count();
}

forge::CanonicalStore synth_store(int sequences, int frames_per_sequence,
                                  int tracklets_per_sequence) {
    forge::CanonicalStore store;
    forge::Rng rng(20240517);
    for (int s = 0; s < sequences; ++s) {
        forge::SourceSequence seq;
        seq.dataset = "bench-" + std::to_string(s);
        for (int f = 1; f <= frames_per_sequence; ++f) {
            forge::FrameRef frame;
            frame.index = f;
            frame.source_frame_id = f;
            frame.image_path = "img/" + std::to_string(f) + ".jpg";
            frame.width = 1920;
            frame.height = 1080;
            seq.frames.push_back(std::move(frame));
        }
        for (int t = 1; t <= tracklets_per_sequence; ++t) {
            forge::Tracklet tracklet;
            tracklet.id = t;
            tracklet.category = "person";
            tracklet.action = "moving across the scene";
            double x = 100.0 + 50.0 * static_cast<double>(rng.bounded(20));
            double y = 100.0 + 30.0 * static_cast<double>(rng.bounded(20));
            for (int f = 1; f <= frames_per_sequence; ++f) {
                x += static_cast<double>(rng.bounded(9)) - 4.0;
                y += static_cast<double>(rng.bounded(9)) - 4.0;
                forge::BoundingBox box{x, y, x + 120.0, y + 240.0};
                tracklet.boxes[f] = box;
            }
            seq.tracklets.push_back(std::move(tracklet));
        }
        store.sequences.push_back(std::move(seq));
        store.eligible_tasks.push_back(
            {forge::Task::Tracking, forge::Task::Fit});
    }
    return store;
}

std::string lines_digest(const std::vector<forge::BuiltRecord>& records) {
    forge::Sha256 hash;
    for (const auto& r : records) {
        hash.update(r.line);
        hash.update("\n");
    }
    return hash.hex_digest();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP benchmark for the batch kernels"};
    int records = 5000;
    int sequences = 64;
    int workers = forge::hardware_workers();
    app.add_option("--records", records, "records to build per run");
    app.add_option("--sequences", sequences, "synthetic source sequences");
    app.add_option("--workers", workers, "parallel worker count");
    CLI11_PARSE(app, argc, argv);

    std::printf("hardware workers: %d, benchmarking with %d\n",
                forge::hardware_workers(), workers);

    const forge::CanonicalStore store = synth_store(sequences, 40, 6);
    forge::ForgeConfig config;
    config.builder.records = records;
    config.builder.task_weights = {{"tracking", 0.8}, {"fit", 0.2}};
    config.builder.negative_ratio = 0.1;

    std::vector<forge::BuiltRecord> serial_records, parallel_records;
    std::vector<std::string> warnings;
    const double serial_build = run_seconds([&] {
        serial_records = forge::build_records(store, config, 7, 1, warnings);
    });
    const double parallel_build = run_seconds([&] {
        parallel_records =
            forge::build_records(store, config, 7, workers, warnings);
    });
    const std::string serial_digest = lines_digest(serial_records);
    const std::string parallel_digest = lines_digest(parallel_records);

    std::printf("build  serial   %8.3f s\n", serial_build);
    std::printf("build  parallel %8.3f s  speedup %.2fx\n", parallel_build,
                serial_build / parallel_build);
    std::printf("build  digests  %s\n",
                serial_digest == parallel_digest ? "identical" : "MISMATCH");

    // Tracking evaluation benchmark: predictions jittered off ground truth.
    std::vector<forge::SotGroundTruth> gts;
    std::vector<forge::SotPrediction> preds;
    forge::Rng rng(99);
    for (int s = 0; s < sequences; ++s) {
        forge::SotGroundTruth gt;
        gt.sequence_id = "seq-" + std::to_string(s);
        gt.width = 1920;
        gt.height = 1080;
        forge::SotPrediction pred;
        pred.sequence_id = gt.sequence_id;
        for (int f = 1; f <= 2000; ++f) {
            const double x = 200.0 + static_cast<double>(rng.bounded(600));
            const double y = 150.0 + static_cast<double>(rng.bounded(400));
            gt.boxes[f] = {x, y, x + 180.0, y + 220.0};
            const double jx = x + static_cast<double>(rng.bounded(60)) - 30.0;
            const double jy = y + static_cast<double>(rng.bounded(60)) - 30.0;
            pred.boxes[f] = {jx, jy, jx + 180.0, jy + 220.0};
        }
        gts.push_back(std::move(gt));
        preds.push_back(std::move(pred));
    }

    forge::MetricReport serial_report, parallel_report;
    const double serial_eval = run_seconds(
        [&] { serial_report = forge::eval_sot(preds, gts, 1); });
    const double parallel_eval = run_seconds(
        [&] { parallel_report = forge::eval_sot(preds, gts, workers); });

    std::printf("eval   serial   %8.3f s\n", serial_eval);
    std::printf("eval   parallel %8.3f s  speedup %.2fx\n", parallel_eval,
                serial_eval / parallel_eval);
    const bool same = serial_report.metrics == parallel_report.metrics;
    std::printf("eval   metrics  %s (AO %.6f)\n",
                same ? "identical" : "MISMATCH",
                serial_report.metrics["AO"]);

    return (serial_digest == parallel_digest && same) ? 0 : 1;
}
