#include "lvnn/checkpoint.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace lvnn {

namespace {

std::vector<double> row_major(const Eigen::MatrixXd& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols,
                            const char* name) {
    const auto v = arr.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
        throw std::invalid_argument(std::string("checkpoint: '") + name + "' has wrong length");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return m;
}

Eigen::VectorXd vector_from(const nlohmann::json& arr, Eigen::Index n, const char* name) {
    Eigen::MatrixXd m = matrix_from(arr, n, 1, name);
    return m.col(0);
}

}  // namespace

nlohmann::json to_json(const Checkpoint& ckpt) {
    const NetParams& p = ckpt.params;
    nlohmann::json doc;
    doc["format"] = "lvnn-checkpoint";
    doc["version"] = kCheckpointVersion;
    doc["mode"] = std::string(to_string(p.mode));
    doc["widths"] = {p.width1(), p.width2()};
    doc["w1"] = row_major(p.w1);
    doc["b1"] = row_major(p.b1);
    doc["w2"] = row_major(p.w2);
    doc["b2"] = row_major(p.b2);
    doc["w3"] = row_major(p.w3);
    doc["b3"] = p.b3;
    if (ckpt.box) {
        doc["scaling"] = {{"T_min", ckpt.box->t_min},
                          {"T_max", ckpt.box->t_max},
                          {"k_min", ckpt.box->k_min},
                          {"k_max", ckpt.box->k_max}};
    }
    return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "lvnn-checkpoint") {
            throw std::invalid_argument("checkpoint: unexpected format tag");
        }
        const int version = doc.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw std::invalid_argument("checkpoint: unsupported version " + std::to_string(version));
        }
        Checkpoint ckpt;
        NetParams& p = ckpt.params;
        p.mode = parse_mode(doc.at("mode").get<std::string>());
        const auto widths = doc.at("widths").get<std::vector<int>>();
        if (widths.size() != 2 || widths[0] < 1 || widths[1] < 1) {
            throw std::invalid_argument("checkpoint: widths must be two positive integers");
        }
        const Eigen::Index h1 = widths[0], h2 = widths[1];
        p.w1 = matrix_from(doc.at("w1"), h1, 2, "w1");
        p.b1 = vector_from(doc.at("b1"), h1, "b1");
        p.w2 = matrix_from(doc.at("w2"), h2, h1, "w2");
        p.b2 = vector_from(doc.at("b2"), h2, "b2");
        p.w3 = matrix_from(doc.at("w3"), 1, h2, "w3");
        p.b3 = doc.at("b3").get<double>();
        p.validate();
        if (doc.contains("scaling")) {
            const auto& s = doc["scaling"];
            ckpt.box = ScalingBox(s.at("T_min").get<double>(), s.at("T_max").get<double>(),
                                  s.at("k_min").get<double>(), s.at("k_max").get<double>());
        }
        return ckpt;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("checkpoint: malformed document: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json(ckpt).dump(1) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open checkpoint " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("checkpoint " + path.string() + ": " + e.what());
    }
    return checkpoint_from_json(doc);
}

}  // namespace lvnn
