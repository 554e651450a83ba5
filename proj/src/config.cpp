#include "nvsim/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace nvsim {

namespace {

// Tracks which parts of the document were read and which values defaulted.
class Tracker {
public:
    explicit Tracker(const json &doc) : doc_(doc), resolved_(doc) { sections_.insert(""); }

    const json &doc() const { return doc_; }
    json &resolved() { return resolved_; }
    std::vector<std::string> &defaulted() { return defaulted_; }

    void leaf(const std::string &p) { leaves_.insert(p); }
    void section(const std::string &p) { sections_.insert(p); }

    void record_default(const std::string &p, const json &value) {
        resolved_[json::json_pointer(p)] = value;
        defaulted_.push_back(p);
    }

    void reject_unknown() const { walk(doc_, ""); }

private:
    void walk(const json &node, const std::string &p) const {
        if (leaves_.count(p)) return;
        if (!sections_.count(p)) throw ConfigError("unknown key: " + (p.empty() ? "/" : p));
        if (node.is_object()) {
            for (auto it = node.begin(); it != node.end(); ++it) walk(it.value(), p + "/" + it.key());
        } else if (node.is_array()) {
            for (std::size_t i = 0; i < node.size(); ++i) walk(node[i], p + "/" + std::to_string(i));
        }
    }

    const json &doc_;
    json resolved_;
    std::vector<std::string> defaulted_;
    std::set<std::string> leaves_;
    std::set<std::string> sections_;
};

// View on one JSON object at a known path.
class Node {
public:
    Node(Tracker &t, const json *j, std::string path) : t_(t), j_(j), path_(std::move(path)) {
        if (j_ && !j_->is_object()) throw ConfigError(where() + ": expected an object");
        if (j_) t_.section(path_);
    }

    bool present() const { return j_ != nullptr; }
    bool has(const std::string &key) const { return j_ && j_->contains(key); }
    std::string child_path(const std::string &key) const { return path_ + "/" + key; }
    std::string where() const { return path_.empty() ? "/" : path_; }

    template <class T> T get(const std::string &key, const T &fallback) {
        if (!has(key)) {
            t_.record_default(child_path(key), json(fallback));
            return fallback;
        }
        return require<T>(key);
    }

    template <class T> std::optional<T> optional(const std::string &key) {
        if (!has(key)) return std::nullopt;
        return require<T>(key);
    }

    template <class T> T require(const std::string &key) {
        if (!has(key)) throw ConfigError("missing required key: " + child_path(key));
        t_.leaf(child_path(key));
        try {
            return j_->at(key).get<T>();
        } catch (const nlohmann::json::exception &) {
            throw ConfigError("wrong type at " + child_path(key));
        }
    }

    Node object(const std::string &key) {
        if (!has(key)) return Node(t_, nullptr, child_path(key));
        return Node(t_, &j_->at(key), child_path(key));
    }

    Node required_object(const std::string &key) {
        if (!has(key)) throw ConfigError("missing required section: " + child_path(key));
        return object(key);
    }

    /// Array of objects; empty when absent.
    std::vector<Node> objects(const std::string &key) {
        std::vector<Node> out;
        if (!has(key)) return out;
        const json &arr = j_->at(key);
        if (!arr.is_array()) throw ConfigError(child_path(key) + ": expected an array");
        t_.section(child_path(key));
        for (std::size_t i = 0; i < arr.size(); ++i) out.emplace_back(t_, &arr[i], child_path(key) + "/" + std::to_string(i));
        return out;
    }

    void fail(const std::string &key, const std::string &why) const {
        throw ConfigError(child_path(key) + ": " + why);
    }

private:
    Tracker &t_;
    const json *j_;
    std::string path_;
};

constexpr double kDeg = std::numbers::pi / 180.0;

RMatrix3 read_matrix3(Node &n, const std::string &key) {
    const auto rows = n.require<std::vector<std::vector<double>>>(key);
    if (rows.size() != 3 || rows[0].size() != 3 || rows[1].size() != 3 || rows[2].size() != 3)
        n.fail(key, "expected a 3x3 array");
    RMatrix3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

int read_two_s(Node &n, const std::string &key, double fallback) {
    const double s = n.get<double>(key, fallback);
    const double two_s = 2.0 * s;
    if (s < 0.0 || std::abs(two_s - std::round(two_s)) > 1e-12) n.fail(key, "spin must be a non-negative multiple of 1/2");
    return static_cast<int>(std::lround(two_s));
}

Nucleus read_nucleus(Node n) {
    Nucleus base;
    const auto preset = n.optional<std::string>("preset");
    if (preset) {
        if (*preset == "c13_first_shell") base = carbon13_first_shell();
        else if (*preset == "n14") base = nitrogen14();
        else n.fail("preset", "unknown preset '" + *preset + "' (c13_first_shell, n14)");
    }
    Nucleus out = base;
    out.label = n.get<std::string>("label", base.label.empty() ? std::string("nucleus") : base.label);
    if (preset) out.spin.two_s = read_two_s(n, "spin", base.spin.value());
    else out.spin.two_s = [&] {
        const double s = n.require<double>("spin");
        if (s < 0.0 || std::abs(2 * s - std::round(2 * s)) > 1e-12) n.fail("spin", "spin must be a non-negative multiple of 1/2");
        return static_cast<int>(std::lround(2 * s));
    }();

    if (n.has("hyperfine_tensor_mhz")) {
        if (n.has("a_parallel_mhz") || n.has("a_perpendicular_mhz"))
            n.fail("hyperfine_tensor_mhz", "give either the full tensor or a_parallel_mhz/a_perpendicular_mhz");
        out.hyperfine_mhz = read_matrix3(n, "hyperfine_tensor_mhz");
    } else {
        const double par = n.get<double>("a_parallel_mhz", base.hyperfine_mhz(2, 2));
        const double perp = n.get<double>("a_perpendicular_mhz", base.hyperfine_mhz(0, 0));
        const double th = n.get<double>("hyperfine_axis_theta_deg", 0.0);
        const double ph = n.get<double>("hyperfine_axis_phi_deg", 0.0);
        out.hyperfine_mhz = axial_tensor(par, perp, unit_vector(th, ph));
    }
    out.quadrupole_mhz = n.get<double>("quadrupole_mhz", base.quadrupole_mhz);
    const double qth = n.get<double>("quadrupole_axis_theta_deg", 0.0);
    const double qph = n.get<double>("quadrupole_axis_phi_deg", 0.0);
    out.quadrupole_axis = unit_vector(qth, qph);
    out.gyromagnetic_mhz_per_gauss = n.get<double>("gamma_mhz_per_gauss", base.gyromagnetic_mhz_per_gauss);
    out.nuclear_zeeman = n.get<bool>("nuclear_zeeman", base.nuclear_zeeman);
    return out;
}

SpinSystem read_system(Node n) {
    SpinSystem sys;
    sys.electron.two_s = read_two_s(n, "electron_spin", 1.0);
    if (n.has("d_ghz") && n.has("d_mhz")) n.fail("d_ghz", "give d_ghz or d_mhz, not both");
    if (n.has("d_ghz")) sys.d_mhz = 1e3 * n.require<double>("d_ghz");
    else sys.d_mhz = n.get<double>("d_mhz", kZeroFieldSplittingMhz);
    if (n.has("g_tensor")) {
        if (n.has("g_electron")) n.fail("g_tensor", "give g_tensor or g_electron, not both");
        sys.g_tensor = read_matrix3(n, "g_tensor");
    } else {
        sys.g_tensor = RMatrix3::Identity() * n.get<double>("g_electron", kDefaultGe);
    }
    sys.field.magnitude_gauss = n.get<double>("field_gauss", 0.0);
    sys.field.theta_deg = n.get<double>("theta_deg", 0.0);
    sys.field.phi_deg = n.get<double>("phi_deg", 0.0);
    if (!n.has("nuclei")) n.get<json>("nuclei", json::array());
    for (auto &nn : n.objects("nuclei")) sys.nuclei.push_back(read_nucleus(nn));
    sys.validate();
    return sys;
}

DriveChannel read_drive(Node &n, const std::string &key, const std::string &fallback) {
    const auto s = n.get<std::string>(key, fallback);
    if (s == "mw") return DriveChannel::mw;
    if (s == "rf") return DriveChannel::rf;
    n.fail(key, "expected \"mw\" or \"rf\"");
    return DriveChannel::mw;
}

std::size_t read_nucleus_index(Node &n, const std::string &key, const SpinSystem &sys, bool needed) {
    const int k = n.get<int>(key, 0);
    if (k < 0 || (needed && static_cast<std::size_t>(k) >= sys.nuclei.size()))
        n.fail(key, "no nucleus with index " + std::to_string(k));
    return static_cast<std::size_t>(k);
}

SpectrumSettings read_spectrum(Node n, const SpinSystem &sys) {
    SpectrumSettings s;
    s.drive = read_drive(n, "drive", "mw");
    s.rf_nucleus = read_nucleus_index(n, "rf_nucleus", sys, s.drive == DriveChannel::rf);
    const auto pops = n.get<std::string>("populations", "ms0");
    if (pops == "ms0") s.ms0_populations = true;
    else if (pops == "equal") s.ms0_populations = false;
    else n.fail("populations", "expected \"ms0\" or \"equal\"");
    s.lines.freq_min_mhz = n.get<double>("freq_min_mhz", 0.0);
    s.lines.freq_max_mhz = n.get<double>("freq_max_mhz", 1e6);
    s.lines.threshold_rel = n.get<double>("threshold_rel", 1e-6);
    s.lines.merge_tol_mhz = n.get<double>("merge_tol_mhz", 1e-6);
    const auto shape = n.get<std::string>("lineshape", "lorentzian");
    if (shape == "lorentzian") s.shape = Lineshape::lorentzian;
    else if (shape == "gaussian") s.shape = Lineshape::gaussian;
    else n.fail("lineshape", "expected \"lorentzian\" or \"gaussian\"");
    s.width_mhz = n.get<double>("width_mhz", 1.0);
    s.step_mhz = n.get<double>("step_mhz", 0.05);
    if (!(s.width_mhz > 0.0)) n.fail("width_mhz", "must be > 0");
    if (!(s.step_mhz > 0.0)) n.fail("step_mhz", "must be > 0");
    if (s.lines.freq_max_mhz <= s.lines.freq_min_mhz) n.fail("freq_max_mhz", "must exceed freq_min_mhz");
    return s;
}

std::size_t slot_of_target(Node &n, const std::string &key, const SpinSystem &sys) {
    const auto target = n.require<std::string>(key);
    if (target == "electron") return 0;
    std::optional<std::size_t> found;
    for (std::size_t k = 0; k < sys.nuclei.size(); ++k)
        if (sys.nuclei[k].label == target) {
            if (found) n.fail(key, "label '" + target + "' is ambiguous");
            found = k + 1;
        }
    if (!found) n.fail(key, "no spin labelled '" + target + "'");
    return *found;
}

Pulse read_pulse(Node &n, const SpinSystem &sys) {
    Pulse p;
    p.channel = read_drive(n, "channel", "mw");
    p.nucleus = read_nucleus_index(n, "nucleus", sys, p.channel == DriveChannel::rf);
    if (n.has("transition")) {
        const auto tr = n.require<std::vector<int>>("transition");
        if (tr.size() != 2) n.fail("transition", "expected [from, to]");
        p.transition = std::make_pair(tr[0], tr[1]);
    }
    p.carrier_mhz = n.optional<double>("carrier_mhz");
    if (!p.transition && !p.carrier_mhz) throw ConfigError(n.where() + ": pulse needs transition or carrier_mhz");
    p.rabi_mhz = n.get<double>("rabi_mhz", 31.25);
    p.phase_rad = n.get<double>("phase_deg", 0.0) * kDeg;
    p.duration_us = n.optional<double>("duration_us");
    if (!p.duration_us) p.angle_rad = n.get<double>("angle_deg", 90.0) * kDeg;
    else if (n.has("angle_deg")) n.fail("angle_deg", "give angle_deg or duration_us, not both");
    p.ideal = n.get<bool>("ideal", false);
    return p;
}

void read_sequence(Node &n, Sequence &seq, const SpinSystem &sys) {
    seq.elements.clear();
    for (auto &e : n.objects("sequence")) {
        const auto type = e.require<std::string>("type");
        if (type == "pulse") {
            seq.elements.emplace_back(read_pulse(e, sys));
        } else if (type == "delay") {
            Delay d;
            d.name = e.get<std::string>("name", "");
            d.duration_us = e.get<double>("duration_us", 0.0);
            if (d.duration_us < 0.0) e.fail("duration_us", "must be >= 0");
            seq.elements.emplace_back(d);
        } else {
            e.fail("type", "expected \"pulse\" or \"delay\"");
        }
    }
}

struct TraceDefaults {
    double tau_max_us;
    double tau_step_us;
    bool phase_cycle;
};

TraceSettings read_trace(Node n, Command c, const SpinSystem &sys) {
    const TraceDefaults d = c == Command::fid ? TraceDefaults{5.0, 0.004, false}
                            : c == Command::echo ? TraceDefaults{10.0, 0.05, true}
                                                 : TraceDefaults{30.0, 0.25, false};
    TraceSettings s;
    const auto es = eigensolve(build_hamiltonian(sys));
    const std::size_t rf_nucleus = read_nucleus_index(n, "rf_nucleus", sys, c == Command::nuclear_echo);
    if (n.has("sequence")) {
        read_sequence(n, s.sequence, sys);
    } else {
        const Sequence builtin = c == Command::fid ? default_fid_sequence(es)
                                 : c == Command::echo ? default_echo_sequence(es)
                                                      : default_nuclear_echo_sequence(es, rf_nucleus);
        n.get<std::string>("sequence", "builtin");
        s.sequence.elements = builtin.elements;
    }

    const auto prop = n.get<std::string>("propagation", "rwa");
    if (prop == "rwa") s.sequence.mode = Propagation::rwa;
    else if (prop == "lab_frame") s.sequence.mode = Propagation::lab_frame;
    else n.fail("propagation", "expected \"rwa\" or \"lab_frame\"");

    s.sweep.name = n.get<std::string>("sweep_delay", "tau");
    const double lo = n.get<double>("tau_min_us", 0.0);
    const double hi = n.get<double>("tau_max_us", d.tau_max_us);
    const double step = n.get<double>("tau_step_us", d.tau_step_us);
    if (!(step > 0.0)) n.fail("tau_step_us", "must be > 0");
    if (hi < lo || lo < 0.0) n.fail("tau_max_us", "need 0 <= tau_min_us <= tau_max_us");
    s.sweep.values = uniform_grid(lo, hi, step);

    Node ro = n.object("readout");
    s.sequence.readout.bright_levels = ro.get<std::vector<int>>("bright_levels", {});
    s.sequence.readout.contrast = ro.get<double>("contrast", 1.0);
    s.sequence.readout.phase_cycle = ro.get<bool>("phase_cycle", d.phase_cycle);
    s.sequence.readout.photon_counts = ro.get<int>("photon_counts", 0);
    if (s.sequence.readout.photon_counts < 0) ro.fail("photon_counts", "must be >= 0");

    if (!n.has("channels")) n.get<json>("channels", json::array());
    for (auto &ch : n.objects("channels")) {
        DecoherenceChannel dc;
        const auto kind = ch.get<std::string>("kind", "dephasing");
        if (kind == "dephasing") dc.kind = DecoherenceKind::dephasing;
        else if (kind == "depolarizing") dc.kind = DecoherenceKind::depolarizing;
        else ch.fail("kind", "expected \"dephasing\" or \"depolarizing\"");
        dc.target_slot = slot_of_target(ch, "target", sys);
        dc.rate_per_us = ch.require<double>("rate_per_us");
        if (dc.rate_per_us < 0.0) ch.fail("rate_per_us", "must be >= 0");
        s.sequence.channels.push_back(dc);
    }

    Node pol = n.object("polarization");
    s.polarization.ms0_manifold = pol.get<bool>("ms0_manifold", false);
    s.polarization.level1_weight = pol.get<double>("level1_weight", 1.0);
    s.polarization.remainder_levels = pol.get<std::vector<int>>("remainder_levels", {});

    Node ens = n.object("ensemble");
    s.ensemble.sigma_mhz = ens.get<double>("sigma_mhz", 0.0);
    s.ensemble.values = ens.get<std::vector<double>>("detunings_mhz", {});
    s.ensemble_samples = ens.get<int>("samples", 0);
    if (s.ensemble_samples < 0) ens.fail("samples", "must be >= 0");

    Node lab = n.object("lab_frame");
    s.lab.steps_per_period = lab.get<double>("steps_per_period", 50.0);
    s.lab.tolerance = lab.get<double>("tolerance", 1e-6);
    s.lab.max_refinements = lab.get<int>("max_refinements", 6);
    return s;
}

FftSettings read_fft(Node n) {
    FftSettings s;
    const auto w = n.get<std::string>("window", "hann");
    if (w == "hann") s.options.window = Window::hann;
    else if (w == "none") s.options.window = Window::none;
    else n.fail("window", "expected \"hann\" or \"none\"");
    s.options.zero_pad = n.get<int>("zero_pad", 4);
    if (s.options.zero_pad < 1) n.fail("zero_pad", "must be >= 1");
    if (auto v = n.optional<double>("t_min_us")) s.options.t_min_us = *v;
    if (auto v = n.optional<double>("t_max_us")) s.options.t_max_us = *v;
    s.min_prominence_rel = n.get<double>("min_prominence_rel", 0.01);
    return s;
}

FitParam read_param_kind(Node &n) {
    const auto name = n.require<std::string>("param");
    if (name == "field_gauss") return FitParam::b_magnitude;
    if (name == "theta_deg") return FitParam::theta;
    if (name == "phi_deg") return FitParam::phi;
    if (name == "a_parallel_mhz") return FitParam::a_parallel;
    if (name == "a_perpendicular_mhz") return FitParam::a_perpendicular;
    n.fail("param", "unknown parameter '" + name + "'");
    return FitParam::b_magnitude;
}

FitProblem read_fit(Node n, const SpinSystem &sys) {
    FitProblem p;
    p.base = sys;
    p.observed_mhz = n.require<std::vector<double>>("observed_mhz");
    for (auto &f : n.objects("free")) {
        FreeParameter fp;
        fp.kind = read_param_kind(f);
        if (fp.kind == FitParam::a_parallel || fp.kind == FitParam::a_perpendicular)
            fp.nucleus = read_nucleus_index(f, "nucleus", sys, true);
        fp.lower = f.require<double>("lower");
        fp.upper = f.require<double>("upper");
        fp.grid_step = f.get<double>("grid_step", 5.0);
        p.free.push_back(fp);
    }
    if (p.free.empty()) throw ConfigError("missing required key: " + n.child_path("free"));
    p.drive = read_drive(n, "drive", "mw");
    p.rf_nucleus = read_nucleus_index(n, "rf_nucleus", sys, p.drive == DriveChannel::rf);
    p.weight_by_population = n.get<bool>("weight_by_population", p.drive == DriveChannel::mw);
    p.lines.freq_min_mhz = n.get<double>("freq_min_mhz", 0.0);
    p.lines.freq_max_mhz = n.get<double>("freq_max_mhz", 1e6);
    p.lines.threshold_rel = n.get<double>("threshold_rel", 1e-3);
    p.max_rms_mhz = n.get<double>("max_rms_mhz", 1.0);
    p.degeneracy_tol_mhz = n.get<double>("degeneracy_tol_mhz", 1e-3);
    p.n_starts = n.get<int>("starts", 8);
    p.validate();
    return p;
}

Pulse mw_pulse(int from, int to, double angle_deg, double phase_deg = 0.0) {
    Pulse p;
    p.channel = DriveChannel::mw;
    p.transition = std::make_pair(from, to);
    p.angle_rad = angle_deg * kDeg;
    p.phase_rad = phase_deg * kDeg;
    return p;
}

} // namespace

Command parse_command(const std::string &name) {
    if (name == "levels") return Command::levels;
    if (name == "spectrum") return Command::spectrum;
    if (name == "fid") return Command::fid;
    if (name == "echo") return Command::echo;
    if (name == "nuclear-echo") return Command::nuclear_echo;
    if (name == "fft") return Command::fft;
    if (name == "fit") return Command::fit;
    throw ConfigError("unknown command: " + name);
}

std::string command_name(Command c) {
    switch (c) {
    case Command::levels: return "levels";
    case Command::spectrum: return "spectrum";
    case Command::fid: return "fid";
    case Command::echo: return "echo";
    case Command::nuclear_echo: return "nuclear-echo";
    case Command::fft: return "fft";
    case Command::fit: return "fit";
    }
    return "?";
}

Sequence default_fid_sequence(const EigenSystem &es) {
    const int x = first_excited_electron_level(es);
    Sequence s;
    s.elements = {mw_pulse(1, x, 90.0), Delay{"tau", 0.0}, mw_pulse(1, x, 90.0)};
    return s;
}

Sequence default_echo_sequence(const EigenSystem &es) {
    const int x = first_excited_electron_level(es);
    Sequence s;
    s.elements = {mw_pulse(1, x, 90.0), Delay{"tau", 0.0}, mw_pulse(1, x, 180.0), Delay{"tau", 0.0},
                  mw_pulse(1, x, 90.0)};
    return s;
}

Sequence default_nuclear_echo_sequence(const EigenSystem &es, std::size_t nucleus) {
    // electron pi into the first excited manifold, rf echo on the neighbouring
    // nuclear transition there, electron pi back for readout
    const int x = first_excited_electron_level(es);
    if (static_cast<std::size_t>(x) >= es.size())
        throw ConfigError("nuclear-echo: no level above " + std::to_string(x) + " for the rf transition");
    auto mw = mw_pulse(1, x, 180.0);
    mw.rabi_mhz = 0.5; // selective against the line from level 2
    auto rf = [&](double angle) {
        Pulse p;
        p.channel = DriveChannel::rf;
        p.nucleus = nucleus;
        p.transition = std::make_pair(x, x + 1);
        p.rabi_mhz = 0.5;
        p.angle_rad = angle * kDeg;
        return p;
    };
    Sequence s;
    s.elements = {mw, rf(90.0), Delay{"tau", 0.0}, rf(180.0), Delay{"tau", 0.0}, rf(90.0), mw};
    return s;
}

RunConfig load_config(const json &doc, Command command) {
    if (!doc.is_object()) throw ConfigError("config root must be an object");
    Tracker tracker(doc);
    Node root(tracker, &doc, "");
    RunConfig cfg;
    const auto seed = root.get<std::int64_t>("seed", 1);
    if (seed < 0) root.fail("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.system = read_system(root.required_object("system"));

    auto wanted = [&](const char *key, bool needed) { return needed || root.has(key); };
    if (wanted("spectrum", command == Command::spectrum)) cfg.spectrum = read_spectrum(root.object("spectrum"), cfg.system);
    if (wanted("fft", command == Command::fft)) cfg.fft = read_fft(root.object("fft"));
    if (wanted("fit", command == Command::fit)) cfg.fit = read_fit(root.required_object("fit"), cfg.system);
    const std::pair<const char *, Command> traces[] = {
        {"fid", Command::fid}, {"echo", Command::echo}, {"nuclear_echo", Command::nuclear_echo}};
    for (const auto &[key, c] : traces) {
        if (!wanted(key, command == c)) continue;
        auto s = read_trace(root.object(key), c, cfg.system);
        if (command == c) cfg.trace = std::move(s);
    }
    tracker.reject_unknown();
    cfg.resolved = tracker.resolved();
    cfg.defaulted = tracker.defaulted();
    return cfg;
}

RunConfig load_config_file(const std::string &path, Command command) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return load_config(doc, command);
}

json run_metadata(const RunConfig &cfg, Command command) {
    json meta;
    meta["command"] = command_name(command);
    meta["seed"] = cfg.seed;
    meta["config"] = cfg.resolved;
    meta["defaulted"] = cfg.defaulted;
    return meta;
}

} // namespace nvsim
