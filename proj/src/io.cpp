#include "kinpred/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace kinpred {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void write_series_csv(const TimeSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t";
    for (std::size_t c = 0; c < series.channels(); ++c) out << ",c" << c;
    out << "\n";
    for (std::size_t i = 0; i < series.length(); ++i) {
        out << fmt_double(series.time_at(i));
        auto f = series.frame(i);
        for (double v : f) out << "," << fmt_double(v);
        out << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

TimeSeries read_series_csv(const std::string& path, double rate) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty csv " + path);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "t")
        throw IoError("csv " + path + ": first column must be t");
    const std::size_t nc = header.size() - 1;
    if (nc == 0) throw IoError("csv " + path + ": no channel columns");

    std::vector<double> data;
    double start = 0.0, prev_t = 0.0;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != nc + 1)
            throw IoError("csv " + path + ": ragged row " + std::to_string(row + 2));
        const double t = std::stod(cells[0]);
        if (row == 0)
            start = t;
        else if (t <= prev_t)
            throw IoError("csv " + path + ": non-monotone timestamps at row " +
                          std::to_string(row + 2));
        prev_t = t;
        for (std::size_t c = 0; c < nc; ++c) data.push_back(std::stod(cells[c + 1]));
        ++row;
    }
    if (row == 0) throw IoError("csv " + path + ": no data rows");
    return TimeSeries(start, rate, nc, std::move(data));
}

void write_manifest(const RecordingManifest& m, const std::string& path) {
    json j;
    j["subject_id"] = m.subject_id;
    j["emg_csv"] = m.emg_csv;
    j["imu_csv"] = m.imu_csv;
    j["markers_csv"] = m.markers_csv;
    if (!m.measured_csv.empty()) j["measured_csv"] = m.measured_csv;
    j["rates"] = {{"emg", m.rate_emg},
                  {"imu", m.rate_imu},
                  {"markers", m.rate_markers},
                  {"measured", m.rate_measured}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(1) << "\n";
}

RecordingManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("manifest " + path + ": " + e.what());
    }
    RecordingManifest m;
    try {
        m.subject_id = j.at("subject_id").get<std::string>();
        m.emg_csv = j.at("emg_csv").get<std::string>();
        m.imu_csv = j.at("imu_csv").get<std::string>();
        m.markers_csv = j.at("markers_csv").get<std::string>();
        if (j.contains("measured_csv")) m.measured_csv = j["measured_csv"].get<std::string>();
        const auto& rates = j.at("rates");
        m.rate_emg = rates.at("emg").get<double>();
        m.rate_imu = rates.at("imu").get<double>();
        m.rate_markers = rates.at("markers").get<double>();
        if (rates.contains("measured")) m.rate_measured = rates["measured"].get<double>();
    } catch (const json::exception& e) {
        throw IoError("manifest " + path + ": " + e.what());
    }
    return m;
}

namespace {
std::string resolve(const std::string& manifest_path, const std::string& rel) {
    const fs::path p(rel);
    if (p.is_absolute()) return rel;
    return (fs::path(manifest_path).parent_path() / p).string();
}
} // namespace

SensorRecording load_recording(const std::string& manifest_path) {
    const RecordingManifest m = read_manifest(manifest_path);
    SensorRecording rec;
    rec.subject_id = m.subject_id;
    rec.emg = read_series_csv(resolve(manifest_path, m.emg_csv), m.rate_emg);
    rec.imu_angle = read_series_csv(resolve(manifest_path, m.imu_csv), m.rate_imu);
    rec.markers = read_series_csv(resolve(manifest_path, m.markers_csv), m.rate_markers);
    if (!m.measured_csv.empty())
        rec.measured_angle =
            read_series_csv(resolve(manifest_path, m.measured_csv), m.rate_measured);
    rec.validate();
    return rec;
}

std::string save_recording(const SensorRecording& rec, const std::string& dir,
                           bool write_measured) {
    fs::create_directories(dir);
    const std::string base = rec.subject_id;
    RecordingManifest m;
    m.subject_id = rec.subject_id;
    m.emg_csv = base + "_emg.csv";
    m.imu_csv = base + "_imu.csv";
    m.markers_csv = base + "_markers.csv";
    m.rate_emg = rec.emg.rate();
    m.rate_imu = rec.imu_angle.rate();
    m.rate_markers = rec.markers.rate();
    write_series_csv(rec.emg, dir + "/" + m.emg_csv);
    write_series_csv(rec.imu_angle, dir + "/" + m.imu_csv);
    write_series_csv(rec.markers, dir + "/" + m.markers_csv);
    if (write_measured && rec.measured_angle) {
        m.measured_csv = base + "_measured.csv";
        m.rate_measured = rec.measured_angle->rate();
        write_series_csv(*rec.measured_angle, dir + "/" + m.measured_csv);
    }
    const std::string manifest_path = dir + "/" + base + "_manifest.json";
    write_manifest(m, manifest_path);
    return manifest_path;
}

std::vector<std::string> list_manifests(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        try {
            read_manifest(entry.path().string());
            out.push_back(entry.path().string());
        } catch (const IoError&) {
            // not a recording manifest; skip
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

SubjectData load_subject_data(const std::string& manifest_path) {
    const SensorRecording rec = load_recording(manifest_path);
    if (!rec.measured_angle)
        throw IoError("manifest " + manifest_path +
                      " has no measured_csv; run the supervise step first");
    SubjectData s;
    s.id = rec.subject_id;
    s.emg = rec.emg;
    s.imu_angle = rec.imu_angle;
    s.measured = *rec.measured_angle;
    return s;
}

void write_grid_csv(const ResultsGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "predictor,feature,T_ms,subject,rmse,r,snr_db,adj_r2\n";
    for (const auto& [key, m] : grid.cells()) {
        out << predictor_name(key.predictor) << "," << feature_mode_name(key.feature) << ","
            << key.t_ms << "," << key.subject << "," << fmt_double(m.rmse) << ","
            << fmt_double(m.r) << "," << fmt_double(m.snr_db) << "," << fmt_double(m.adj_r2)
            << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

ResultsGrid read_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty grid csv " + path);
    ResultsGrid grid;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 8) throw IoError("grid csv " + path + ": ragged row");
        GridKey key{predictor_from_name(cells[0]), feature_mode_from_name(cells[1]),
                    std::stoi(cells[2]), cells[3]};
        MetricSet m;
        m.rmse = std::stod(cells[4]);
        m.r = std::stod(cells[5]);
        m.snr_db = std::stod(cells[6]);
        m.adj_r2 = std::stod(cells[7]);
        grid.insert(key, m);
    }
    return grid;
}

void write_feature_csv(const std::vector<LabeledSample>& samples,
                       const std::vector<std::string>& subject_ids, FeatureMode mode,
                       const std::string& path) {
    if (subject_ids.size() != samples.size() && subject_ids.size() != 1)
        throw InvalidInput("write_feature_csv: subject id count mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const std::size_t width = feature_width(mode);
    out << "end_time";
    for (std::size_t i = 1; i < width; ++i) out << ",f_" << i;
    out << ",theta,label,T,subject_id,mode\n";
    for (std::size_t row = 0; row < samples.size(); ++row) {
        const auto& s = samples[row];
        if (s.features.values.size() != width)
            throw InvalidInput("write_feature_csv: vector width mismatch");
        out << fmt_double(s.features.end_time);
        for (std::size_t i = 0; i + 1 < width; ++i)
            out << "," << fmt_double(s.features.values[i]);
        out << "," << fmt_double(s.features.values[width - 1]) << ","
            << fmt_double(s.label) << "," << fmt_double(s.prediction_time) << ","
            << (subject_ids.size() == 1 ? subject_ids[0] : subject_ids[row]) << ","
            << feature_mode_name(mode) << "\n";
    }
}

namespace {

json metric_json(const MetricSet& m) {
    return json{{"rmse", m.rmse}, {"r", m.r}, {"snr_db", m.snr_db}, {"adj_r2", m.adj_r2}};
}

// Per-subject RMSE values grouped along one axis, for the ANOVA tables.
json anova_entry(const ResultsGrid& grid, Predictor p, Axis axis, double alpha) {
    const auto averaged = average_axis(grid, p, axis);
    std::vector<std::vector<double>> groups;
    std::vector<std::string> names;
    for (const auto& [label, cell] : averaged) {
        std::vector<double> g;
        for (const auto& m : cell.per_subject) g.push_back(m.rmse);
        groups.push_back(std::move(g));
        names.push_back(label);
    }
    json entry;
    entry["metric"] = "rmse";
    entry["predictor"] = predictor_name(p);
    entry["axis"] = axis == Axis::Feature ? "feature" : "time";
    entry["groups"] = names;
    if (groups.size() >= 2) {
        const AnovaResult a = anova_oneway(groups);
        entry["f"] = a.f;
        entry["p"] = a.p;
        entry["significant"] = a.p < alpha;
    } else {
        entry["f"] = nullptr;
        entry["p"] = nullptr;
        entry["significant"] = false;
    }
    return entry;
}

} // namespace

void write_report_json(const ResultsGrid& grid, const ReportOptions& options,
                       const std::string& path) {
    json j;
    j["alpha"] = options.alpha;
    j["n_subjects"] = grid.subjects().size();
    j["n_features"] = grid.features().size();
    j["n_times"] = grid.times_ms().size();

    json averages = json::object();
    json anova = json::array();
    for (Predictor p : grid.predictors()) {
        json by_feature = json::object();
        for (const auto& [label, cell] : average_axis(grid, p, Axis::Feature))
            by_feature[label] = metric_json(cell.per_subject_mean);
        json by_time = json::object();
        for (const auto& [label, cell] : average_axis(grid, p, Axis::Time))
            by_time[label] = metric_json(cell.per_subject_mean);
        averages[predictor_name(p)] = {{"by_feature", by_feature}, {"by_time", by_time}};
        if (grid.features().size() >= 2)
            anova.push_back(anova_entry(grid, p, Axis::Feature, options.alpha));
        if (grid.times_ms().size() >= 2)
            anova.push_back(anova_entry(grid, p, Axis::Time, options.alpha));
    }
    j["averages"] = averages;
    j["anova"] = anova;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(1) << "\n";
}

SegmentModel load_segment_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("segment model " + path + ": " + e.what());
    }
    SegmentModel m;
    for (const auto& p : j.at("markers")) {
        if (p.size() != 3) throw IoError("segment model: markers must be 3-vectors");
        m.local_markers.emplace_back(p[0].get<double>(), p[1].get<double>(),
                                     p[2].get<double>());
    }
    if (j.contains("weights"))
        m.weights = j["weights"].get<std::vector<double>>();
    else
        m.weights.assign(m.local_markers.size(), 1.0);
    const auto& a = j.at("joint_axis");
    m.joint_axis = Eigen::Vector3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    m.validate();
    return m;
}

void save_segment_model_json(const SegmentModel& model, const std::string& path) {
    json j;
    json markers = json::array();
    for (const auto& p : model.local_markers) markers.push_back({p.x(), p.y(), p.z()});
    j["markers"] = markers;
    j["weights"] = model.weights;
    j["joint_axis"] = {model.joint_axis.x(), model.joint_axis.y(), model.joint_axis.z()};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(1) << "\n";
}

namespace {

json mat_to_json_gate_major(const Mat<float>& canonical) {
    // Stored in x out; serialized out x in row-major.
    std::vector<double> flat;
    flat.reserve(canonical.size());
    for (int g = 0; g < canonical.cols; ++g)
        for (int d = 0; d < canonical.rows; ++d) flat.push_back(canonical(d, g));
    return json{{"rows", canonical.cols}, {"cols", canonical.rows}, {"data", flat}};
}

Mat<float> mat_from_json_gate_major(const json& j) {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (int(data.size()) != rows * cols) throw IoError("model json: weight size mismatch");
    Mat<float> m(cols, rows); // back to canonical in x out
    for (int g = 0; g < rows; ++g)
        for (int d = 0; d < cols; ++d) m(d, g) = float(data[std::size_t(g) * cols + d]);
    return m;
}

json lstm_layer_to_json(const LstmLayer<float>& l) {
    return json{{"input", l.in},
                {"hidden", l.hid},
                {"input_weights", mat_to_json_gate_major(l.wxt)},
                {"recurrent_weights", mat_to_json_gate_major(l.wht)},
                {"bias", std::vector<double>(l.bias.begin(), l.bias.end())}};
}

LstmLayer<float> lstm_layer_from_json(const json& j) {
    LstmLayer<float> l;
    l.in = j.at("input").get<int>();
    l.hid = j.at("hidden").get<int>();
    l.wxt = mat_from_json_gate_major(j.at("input_weights"));
    l.wht = mat_from_json_gate_major(j.at("recurrent_weights"));
    const auto b = j.at("bias").get<std::vector<double>>();
    l.bias.assign(b.begin(), b.end());
    if (l.wxt.rows != l.in || l.wxt.cols != 4 * l.hid || int(l.bias.size()) != 4 * l.hid)
        throw IoError("model json: lstm layer shape mismatch");
    l.refresh_transposes();
    return l;
}

json affine_to_json(const Affine<float>& a) {
    return json{{"weights", mat_to_json_gate_major(a.wt)},
                {"bias", std::vector<double>(a.bias.begin(), a.bias.end())}};
}

Affine<float> affine_from_json(const json& j) {
    Affine<float> a;
    a.wt = mat_from_json_gate_major(j.at("weights"));
    a.in = a.wt.rows;
    a.out = a.wt.cols;
    const auto b = j.at("bias").get<std::vector<double>>();
    a.bias.assign(b.begin(), b.end());
    if (int(a.bias.size()) != a.out) throw IoError("model json: affine shape mismatch");
    a.refresh_transposes();
    return a;
}

json layout_to_json(const FeatureLayout& l) {
    return json{{"mode", feature_mode_name(l.mode)},
                {"kinematics_only", l.kinematics_only},
                {"width", l.width},
                {"ft_offset", l.ft_offset},
                {"fl_offset", l.fl_offset},
                {"theta_offset", l.theta_offset}};
}

FeatureLayout layout_from_json(const json& j) {
    FeatureLayout l;
    l.mode = feature_mode_from_name(j.at("mode").get<std::string>());
    l.kinematics_only = j.at("kinematics_only").get<bool>();
    l.width = j.at("width").get<int>();
    l.ft_offset = j.at("ft_offset").get<int>();
    l.fl_offset = j.at("fl_offset").get<int>();
    l.theta_offset = j.at("theta_offset").get<int>();
    return l;
}

json stats_to_json(const EmgNormStats& e, const FeatStats& f) {
    return json{{"emg_mean", e.mean},
                {"emg_std", e.std},
                {"eps", e.eps},
                {"feat_mean", f.mean},
                {"feat_std", f.std}};
}

void stats_from_json(const json& j, EmgNormStats& e, FeatStats& f) {
    e.mean = j.at("emg_mean").get<std::array<double, 9>>();
    e.std = j.at("emg_std").get<std::array<double, 9>>();
    e.eps = j.at("eps").get<std::array<double, 9>>();
    f.mean = j.at("feat_mean").get<std::array<double, kFtBlock + 1>>();
    f.std = j.at("feat_std").get<std::array<double, kFtBlock + 1>>();
}

} // namespace

void save_lstm_bundle(const LstmBundle& bundle, const std::string& path) {
    const KinPreNet<float>& net = bundle.net;
    json j;
    j["format_version"] = 1;
    j["kind"] = "lstm";
    j["layout"] = layout_to_json(bundle.layout);
    j["net_layout"] = {{"feat_width", net.layout.feat_width},
                       {"fl_offset", net.layout.fl_offset},
                       {"channels", net.layout.channels},
                       {"ext_steps", net.layout.ext_steps},
                       {"seq_len", net.layout.seq_len}};
    j["label_mean"] = net.label_mean;
    j["label_std"] = net.label_std;
    j["normalization"] = stats_to_json(bundle.emg_stats, bundle.feat_stats);
    if (net.layout.has_extractor()) {
        json layers = json::array();
        for (const auto& l : net.extractor.layers) layers.push_back(lstm_layer_to_json(l));
        j["extractor"] = {{"layers", layers}, {"head", affine_to_json(net.extractor.head)}};
    }
    json layers = json::array();
    for (const auto& l : net.predictor.layers) layers.push_back(lstm_layer_to_json(l));
    j["predictor"] = {{"layers", layers},
                      {"fc1", affine_to_json(net.predictor.fc1)},
                      {"fc2", affine_to_json(net.predictor.fc2)}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(1) << "\n";
}

LstmBundle load_lstm_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("model " + path + ": " + e.what());
    }
    if (j.at("format_version").get<int>() != 1)
        throw IoError("model " + path + ": unsupported format version");
    if (j.at("kind").get<std::string>() != "lstm")
        throw IoError("model " + path + ": not an lstm bundle");

    LstmBundle bundle;
    bundle.layout = layout_from_json(j.at("layout"));
    KinPreNet<float>& net = bundle.net;
    const auto& lay = j.at("net_layout");
    net.layout.feat_width = lay.at("feat_width").get<int>();
    net.layout.fl_offset = lay.at("fl_offset").get<int>();
    net.layout.channels = lay.at("channels").get<int>();
    net.layout.ext_steps = lay.at("ext_steps").get<int>();
    net.layout.seq_len = lay.at("seq_len").get<int>();
    net.label_mean = j.at("label_mean").get<double>();
    net.label_std = j.at("label_std").get<double>();
    stats_from_json(j.at("normalization"), bundle.emg_stats, bundle.feat_stats);
    if (net.layout.has_extractor()) {
        for (const auto& lj : j.at("extractor").at("layers"))
            net.extractor.layers.push_back(lstm_layer_from_json(lj));
        net.extractor.head = affine_from_json(j.at("extractor").at("head"));
    }
    for (const auto& lj : j.at("predictor").at("layers"))
        net.predictor.layers.push_back(lstm_layer_from_json(lj));
    net.predictor.fc1 = affine_from_json(j.at("predictor").at("fc1"));
    net.predictor.fc2 = affine_from_json(j.at("predictor").at("fc2"));
    return bundle;
}

void save_svr_bundle(const SvrBundle& bundle, const std::string& path) {
    json j;
    j["format_version"] = 1;
    j["kind"] = "svr";
    j["layout"] = layout_to_json(bundle.layout);
    j["normalization"] = stats_to_json(bundle.emg_stats, bundle.feat_stats);
    j["support_vectors"] = bundle.model.support_vectors;
    j["dual_coefs"] = bundle.model.dual_coefs;
    j["bias"] = bundle.model.bias;
    j["gamma"] = bundle.model.gamma;
    j["c"] = bundle.model.c;
    j["epsilon"] = bundle.model.epsilon;
    j["kkt_residual"] = bundle.model.kkt_residual;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(1) << "\n";
}

SvrBundle load_svr_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("model " + path + ": " + e.what());
    }
    if (j.at("kind").get<std::string>() != "svr")
        throw IoError("model " + path + ": not an svr bundle");
    SvrBundle bundle;
    bundle.layout = layout_from_json(j.at("layout"));
    stats_from_json(j.at("normalization"), bundle.emg_stats, bundle.feat_stats);
    bundle.model.support_vectors =
        j.at("support_vectors").get<std::vector<std::vector<double>>>();
    bundle.model.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
    bundle.model.bias = j.at("bias").get<double>();
    bundle.model.gamma = j.at("gamma").get<double>();
    bundle.model.c = j.at("c").get<double>();
    bundle.model.epsilon = j.at("epsilon").get<double>();
    bundle.model.kkt_residual = j.at("kkt_residual").get<double>();
    return bundle;
}

} // namespace kinpred
