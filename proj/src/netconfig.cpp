#include <cstdio>
#include <map>
#include <sstream>

#include "tonus/network.hpp"
#include "tonus/wire.hpp"

namespace tonus {

namespace {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::SpikingConv: return "spiking_conv";
        case LayerKind::Conv: return "conv";
        case LayerKind::ConvTranspose: return "conv_transpose";
        case LayerKind::ResBlock: return "res_block";
        case LayerKind::SepConvBlock: return "sep_conv_block";
    }
    return "conv";
}

LayerKind kind_from(const std::string& s) {
    if (s == "spiking_conv") return LayerKind::SpikingConv;
    if (s == "conv") return LayerKind::Conv;
    if (s == "conv_transpose") return LayerKind::ConvTranspose;
    if (s == "res_block") return LayerKind::ResBlock;
    if (s == "sep_conv_block") return LayerKind::SepConvBlock;
    throw ValidationError("network config: unknown layer kind '" + s + "'");
}

const char* neuron_name(NeuronKind k) {
    switch (k) {
        case NeuronKind::Cuba: return "cuba";
        case NeuronKind::Plif: return "plif";
        case NeuronKind::None: return "none";
    }
    return "none";
}

NeuronKind neuron_from(const std::string& s) {
    if (s == "cuba") return NeuronKind::Cuba;
    if (s == "plif") return NeuronKind::Plif;
    if (s == "none") return NeuronKind::None;
    throw ValidationError("network config: unknown neuron '" + s + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void format_layer(std::ostringstream& os, const char* group, std::size_t index,
                  const LayerSpec& l) {
    os << '[' << group << '.' << index << "]\n";
    os << "kind=" << kind_name(l.kind) << '\n';
    os << "kernel=" << l.kernel << '\n';
    os << "stride=" << l.stride << '\n';
    os << "out_channels=" << l.out_channels << '\n';
    os << "dilation=" << l.dilation << '\n';
    os << "neuron=" << neuron_name(l.neuron) << '\n';
    os << "batchnorm=" << (l.batchnorm ? 1 : 0) << '\n';
}

using Section = std::map<std::string, std::string>;

class SectionView {
public:
    SectionView(const std::string& name, const Section& kv) : name_(name), kv_(kv) {}

    std::string str(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) {
            throw ValidationError("network config: [" + name_ + "] missing key '" + key + "'");
        }
        return it->second;
    }
    std::string str_or(const std::string& key, const std::string& dflt) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }
    std::size_t num(const std::string& key) const { return std::stoull(str(key)); }
    std::size_t num_or(const std::string& key, std::size_t dflt) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : std::stoull(it->second);
    }
    double real_or(const std::string& key, double dflt) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : std::stod(it->second);
    }

private:
    const std::string& name_;
    const Section& kv_;
};

LayerSpec parse_layer(const SectionView& s) {
    LayerSpec l;
    l.kind = kind_from(s.str("kind"));
    l.kernel = s.num("kernel");
    l.stride = s.num_or("stride", 1);
    l.out_channels = s.num("out_channels");
    l.dilation = s.num_or("dilation", 1);
    l.neuron = neuron_from(s.str_or("neuron", "none"));
    l.batchnorm = s.num_or("batchnorm", 0) != 0;
    return l;
}

}  // namespace

std::string format_network_spec(const NetworkSpec& spec) {
    std::ostringstream os;
    os << "# tonus-net v1\n";
    os << "[network]\n";
    os << "model_width=" << spec.model_width << '\n';
    os << "model_height=" << spec.model_height << '\n';
    os << "heads=" << (spec.heads == HeadsMode::MultiHead ? "multi" : "heatmaps") << '\n';
    os << "head_branch_channels=" << spec.head_branch_channels << '\n';
    os << "cuba_alpha_u=" << fmt_double(spec.cuba.alpha_u) << '\n';
    os << "cuba_alpha_v=" << fmt_double(spec.cuba.alpha_v) << '\n';
    os << "cuba_theta=" << fmt_double(spec.cuba.theta) << '\n';
    os << "plif_tau=" << fmt_double(spec.plif.tau) << '\n';
    os << "plif_theta=" << fmt_double(spec.plif.theta) << '\n';
    os << "plif_v_reset=" << fmt_double(spec.plif.v_reset) << '\n';
    for (std::size_t i = 0; i < spec.encoder.size(); ++i) {
        format_layer(os, "encoder", i, spec.encoder[i]);
    }
    for (std::size_t i = 0; i < spec.decoder.size(); ++i) {
        format_layer(os, "decoder", i, spec.decoder[i]);
    }
    return os.str();
}

void save_network_spec(const NetworkSpec& spec, const std::string& path) {
    write_file_text(path, format_network_spec(spec));
}

NetworkSpec parse_network_spec(const std::string& text) {
    std::map<std::string, Section> sections;
    std::vector<std::string> order;
    std::string current;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line = line.substr(start);
        if (line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            current = line.substr(1, line.size() - 2);
            if (!sections.count(current)) order.push_back(current);
            sections[current];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos || current.empty()) {
            throw ValidationError("network config: malformed line " + std::to_string(lineno));
        }
        sections[current][line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!sections.count("network")) {
        throw ValidationError("network config: missing [network] section");
    }

    NetworkSpec spec;
    spec.encoder.clear();
    spec.decoder.clear();
    SectionView net("network", sections.at("network"));
    spec.model_width = static_cast<std::uint16_t>(net.num_or("model_width", 160));
    spec.model_height = static_cast<std::uint16_t>(net.num_or("model_height", 160));
    const std::string heads = net.str_or("heads", "multi");
    if (heads == "multi") {
        spec.heads = HeadsMode::MultiHead;
    } else if (heads == "heatmaps") {
        spec.heads = HeadsMode::HeatmapsOnly;
    } else {
        throw ValidationError("network config: heads must be multi or heatmaps");
    }
    spec.head_branch_channels = net.num_or("head_branch_channels", 96);
    spec.cuba.alpha_u = net.real_or("cuba_alpha_u", spec.cuba.alpha_u);
    spec.cuba.alpha_v = net.real_or("cuba_alpha_v", spec.cuba.alpha_v);
    spec.cuba.theta = net.real_or("cuba_theta", spec.cuba.theta);
    spec.plif.tau = net.real_or("plif_tau", spec.plif.tau);
    spec.plif.theta = net.real_or("plif_theta", spec.plif.theta);
    spec.plif.v_reset = net.real_or("plif_v_reset", spec.plif.v_reset);

    for (const auto& group : {std::string("encoder"), std::string("decoder")}) {
        for (std::size_t i = 0;; ++i) {
            const std::string name = group + "." + std::to_string(i);
            auto it = sections.find(name);
            if (it == sections.end()) break;
            SectionView view(name, it->second);
            LayerSpec l = parse_layer(view);
            if (group == "encoder") {
                spec.encoder.push_back(l);
            } else {
                spec.decoder.push_back(l);
            }
        }
    }
    spec.validate();
    return spec;
}

NetworkSpec load_network_spec(const std::string& path) {
    return parse_network_spec(read_file_text(path));
}

}  // namespace tonus
