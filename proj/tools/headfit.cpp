/*
 * headfit - pin-based 3D head model fitting and evaluation.
 *
 * Copyright 2026 The headfit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "headfit/dataio.hpp"
#include "headfit/error.hpp"
#include "headfit/fitter.hpp"
#include "headfit/http_server.hpp"
#include "headfit/metrics.hpp"
#include "headfit/morphable.hpp"
#include "headfit/params.hpp"
#include "headfit/service.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace headfit;

namespace {

enum Exit { Ok = 0, Usage = 1, DataError = 2, NumericalFailure = 3 };

int exit_code_for(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::SingularSystem:
    case ErrorCode::DegenerateInput:
    case ErrorCode::DegenerateExtent:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::BehindCamera:
        return NumericalFailure;
    default:
        return DataError;
    }
}

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<fs::path> json_files(const fs::path& dir)
{
    if (!fs::is_directory(dir))
    {
        throw Error(ErrorCode::IoError, "'" + dir.string() + "' is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
    {
        if (entry.is_regular_file() && entry.path().extension() == ".json")
        {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct FitArgs
{
    std::string model;
    std::string pins;
    std::string out;
    std::string config;
};

int run_fit(const FitArgs& args)
{
    const HeadModel model = load_model(args.model);
    const PinFile pins = load_pins(args.pins);
    const FitConfig config = args.config.empty() ? FitConfig{} : fit_config_from_json(load_json(args.config));

    std::optional<FitParams> init = estimate_pose_linear(model, ShapeParams::zeros(model), pins.pins);
    if (!init)
    {
        init = FitParams::neutral(model, pins.image_size);
    }
    const FitResult result = fit(model, pins.pins, init, config);

    Annotation a;
    a.model_id = pins.model_id;
    a.image_ref = pins.image_ref;
    a.image_size = pins.image_size;
    a.vertices = decode(model, result.params.shape).vertices;
    a.matrices = orthographic_matrices(result.params.similarity(), pins.image_size);
    const Points2D head = project_vertices(
        model, result.params, model.subset(model.has_subset(subset_names::head) ? subset_names::head : subset_names::full));
    const Eigen::RowVector2d lo = head.colwise().minCoeff();
    const Eigen::RowVector2d hi = head.colwise().maxCoeff();
    a.bbox = {lo.x(), lo.y(), std::max(hi.x() - lo.x(), 1e-9), std::max(hi.y() - lo.y(), 1e-9)};
    a.fit = result;
    save_annotation(args.out, a);

    std::cout << "fit: pins=" << pins.pins.size() << " rms_pin_error_px=" << num(result.rms_pin_error)
              << " iterations=" << result.iterations << " converged=" << (result.converged ? "true" : "false")
              << "\n";
    return Ok;
}

struct EvalArgs
{
    std::string gt;
    std::string pred;
    std::string out;
    std::string model;
    int n = 5;
    std::string subgroups;
    bool with_scale = false;
    int threads = 0;
};

std::vector<std::string> split_keys(const std::string& list)
{
    std::vector<std::string> keys;
    std::stringstream ss(list);
    std::string key;
    while (std::getline(ss, key, ','))
    {
        if (!key.empty())
        {
            keys.push_back(key);
        }
    }
    return keys;
}

int run_eval(const EvalArgs& args)
{
    BenchmarkOptions options;
    options.zn_n = args.n;
    options.chamfer_with_scale = args.with_scale;
    options.threads = args.threads;
    options.subgroup_keys = split_keys(args.subgroups);
    for (const auto& key : options.subgroup_keys)
    {
        if (!is_attribute_key(key))
        {
            std::cerr << "error: unknown subgroup key '" << key << "'\n";
            return Usage;
        }
    }
    if (args.n < 1)
    {
        std::cerr << "error: --n must be at least 1\n";
        return Usage;
    }

    const fs::path model_path = args.model.empty() ? fs::path(args.gt) / "model.hfm" : fs::path(args.model);
    const HeadModel model = load_model(model_path);

    std::map<std::string, fs::path> gt_files;
    std::map<std::string, fs::path> pred_files;
    for (const auto& p : json_files(args.gt))
        gt_files[p.stem().string()] = p;
    for (const auto& p : json_files(args.pred))
        pred_files[p.stem().string()] = p;

    std::vector<std::string> offenders;
    for (const auto& [id, p] : gt_files)
        if (!pred_files.count(id))
            offenders.push_back(id + " (no prediction)");
    for (const auto& [id, p] : pred_files)
        if (!gt_files.count(id))
            offenders.push_back(id + " (no ground truth)");
    if (!offenders.empty())
    {
        std::cerr << "error: sample ids differ between --gt and --pred:\n";
        for (const auto& o : offenders)
            std::cerr << "  " << o << "\n";
        return DataError;
    }

    std::vector<BenchmarkSample> samples;
    for (const auto& [id, gt_path] : gt_files)
    {
        BenchmarkSample s;
        s.id = id;
        s.gt = load_annotation(gt_path);
        try
        {
            s.prediction = load_annotation(pred_files.at(id));
        }
        catch (const Error& e)
        {
            s.failure = e.what();
        }
        samples.push_back(std::move(s));
    }

    const MetricReport report = benchmark_report(model, std::move(samples), options);
    save_report(args.out, report);

    for (const auto& s : report.samples)
        if (s.failed)
            std::cerr << "warning: sample '" << s.id << "' failed: " << s.failure << "\n";
    if (report.failed_count > 0)
        std::cerr << "warning: " << report.failed_count << " sample(s) failed\n";

    const auto& o = report.overall;
    std::cout << "eval: samples=" << report.samples.size() << " failed=" << report.failed_count
              << " nme=" << num(o.nme) << " z" << report.zn_n << "=" << (o.zn ? num(*o.zn) : std::string("n/a"))
              << " chamfer=" << num(o.chamfer) << " pose_frob=" << num(o.pose_frob)
              << " pose_angle_deg=" << num(o.pose_angle) << "\n";
    return Ok;
}

struct QualityArgs
{
    std::string labels;
    std::string bboxes;
    std::string out;
    bool literal_norm = false;
};

int run_quality(const QualityArgs& args)
{
    const auto boxes = bboxes_from_json(load_json(args.bboxes));
    std::vector<LabeledImage> images;
    for (const auto& path : json_files(args.labels))
    {
        LabeledImage image = labels_from_json(load_json(path));
        const auto it = boxes.find(image.image_id);
        if (it == boxes.end())
        {
            throw Error(ErrorCode::SchemaMismatch, "no bounding box for image '" + image.image_id + "'");
        }
        image.bbox = it->second;
        images.push_back(std::move(image));
    }
    const PairDistance mode = args.literal_norm ? PairDistance::ConcatenatedNorm : PairDistance::MeanPerLandmark;
    const double score = quality_score(images, mode);

    if (!args.out.empty())
    {
        nlohmann::json j{{"schema", "headfit.quality"}, {"version", kFormatVersion},
                         {"pair_distance", args.literal_norm ? "concatenated-norm" : "mean-per-landmark"},
                         {"quality_score", score}, {"images", nlohmann::json::object()}};
        for (const auto& image : images)
            j["images"][image.image_id] = image_quality_score(image, mode);
        save_json(args.out, j);
    }
    std::cout << "quality: images=" << images.size() << " f_q=" << num(score) << "\n";
    return Ok;
}

struct SynthArgs
{
    std::uint64_t seed = 0;
    int k = kCanonicalVertexCount;
    int s = 50;
    int e = 20;
    std::string out;
};

int run_synth(const SynthArgs& args)
{
    const HeadModel model = synth_model(args.seed, args.k, args.s, args.e);
    const std::string bytes = encode_model(model);
    write_file_atomic(args.out, bytes);
    std::cout << "synth-model: vertices=" << model.vertex_count() << " shape=" << model.shape_count()
              << " expr=" << model.expr_count() << " faces=" << model.faces.size() << " sha256=" << sha256_hex(bytes)
              << "\n";
    return Ok;
}

struct ValidateArgs
{
    std::string model;
    std::string annotation;
};

int run_validate(const ValidateArgs& args)
{
    const HeadModel model = load_model(args.model);
    const Annotation a = load_annotation(args.annotation);
    const auto violations = validate_annotation(a, model);
    for (const auto& v : violations)
        std::cerr << "violation: " << v.field << ": " << v.message << "\n";
    std::cout << "validate: violations=" << violations.size() << "\n";
    return violations.empty() ? Ok : DataError;
}

struct ServeArgs
{
    std::vector<std::string> models;
    std::string host = "127.0.0.1";
    int port = 8080;
};

HttpServer* g_server = nullptr;

extern "C" void handle_signal(int)
{
    if (g_server)
        g_server->stop();
}

int run_serve(const ServeArgs& args)
{
    AnnotationService service;
    for (const auto& entry : args.models)
    {
        // Either "PATH" (id = file stem) or "ID=PATH".
        const auto eq = entry.find('=');
        const std::string id = eq == std::string::npos ? fs::path(entry).stem().string() : entry.substr(0, eq);
        const std::string path = eq == std::string::npos ? entry : entry.substr(eq + 1);
        service.add_model(id, load_model(path));
    }
    HttpServer server(service);
    const int port = server.bind(args.host, args.port);
    g_server = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "serve: listening on http://" << args.host << ":" << port << " models=" << args.models.size()
              << std::endl;
    server.run();
    g_server = nullptr;
    return Ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"headfit - pin-based 3D head model fitting and evaluation"};
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the model to a pin file and write an annotation");
    fit_cmd->add_option("--model", fit_args.model, "Binary model container")->required();
    fit_cmd->add_option("--pins", fit_args.pins, "Pin file")->required();
    fit_cmd->add_option("--out", fit_args.out, "Output annotation with fit block")->required();
    fit_cmd->add_option("--config", fit_args.config, "Fit configuration overrides");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate predictions against ground-truth annotations");
    eval_cmd->add_option("--gt", eval_args.gt, "Directory of ground-truth annotations")->required();
    eval_cmd->add_option("--pred", eval_args.pred, "Directory of predicted annotations")->required();
    eval_cmd->add_option("--out", eval_args.out, "Report file")->required();
    eval_cmd->add_option("--model", eval_args.model, "Model container (default: <gt>/model.hfm)");
    eval_cmd->add_option("--n", eval_args.n, "Neighbourhood size of the ordinal depth accuracy")->capture_default_str();
    eval_cmd->add_option("--subgroups", eval_args.subgroups, "Comma-separated attribute keys");
    eval_cmd->add_flag("--with-scale", eval_args.with_scale, "Allow scale in the keypoint alignment");
    eval_cmd->add_option("--threads", eval_args.threads, "Worker threads (default: HEADFIT_THREADS or all cores)");

    QualityArgs quality_args;
    auto* quality_cmd = app.add_subcommand("quality", "Annotator agreement score over label sets");
    quality_cmd->add_option("--labels", quality_args.labels, "Directory of label files")->required();
    quality_cmd->add_option("--bboxes", quality_args.bboxes, "Bounding box file")->required();
    quality_cmd->add_option("--out", quality_args.out, "Optional per-image score file");
    quality_cmd->add_flag("--literal-norm", quality_args.literal_norm,
                          "Use the norm of the concatenated coordinate difference");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth-model", "Write a deterministic synthetic model");
    synth_cmd->add_option("--seed", synth_args.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--k", synth_args.k, "Vertex count")->capture_default_str();
    synth_cmd->add_option("--s", synth_args.s, "Shape coefficients")->capture_default_str();
    synth_cmd->add_option("--e", synth_args.e, "Expression coefficients")->capture_default_str();
    synth_cmd->add_option("--out", synth_args.out, "Output container")->required();

    ValidateArgs validate_args;
    auto* validate_cmd = app.add_subcommand("validate", "Check an annotation against a model");
    validate_cmd->add_option("--model", validate_args.model, "Model container")->required();
    validate_cmd->add_option("--annotation", validate_args.annotation, "Annotation file")->required();

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "Run the annotation service");
    serve_cmd->add_option("--model", serve_args.models, "Model container, PATH or ID=PATH (repeatable)")
        ->required();
    serve_cmd->add_option("--host", serve_args.host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", serve_args.port, "Port (0 picks a free one)")->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? Ok : Usage;
    }

    try
    {
        if (fit_cmd->parsed())
            return run_fit(fit_args);
        if (eval_cmd->parsed())
            return run_eval(eval_args);
        if (quality_cmd->parsed())
            return run_quality(quality_args);
        if (synth_cmd->parsed())
            return run_synth(synth_args);
        if (validate_cmd->parsed())
            return run_validate(validate_args);
        if (serve_cmd->parsed())
            return run_serve(serve_args);
    }
    catch (const Error& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return DataError;
    }
    return Usage;
}
