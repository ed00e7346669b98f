#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "mdhp/events.hpp"
#include "mdhp/rng.hpp"

namespace mdhp::traffic {

inline constexpr std::size_t kWindowSize = 128;
inline constexpr std::size_t kFeatureCount = 11;  // 10 header fields + timestamp
/// Candidate rate of the NPP and DRP samplers: gaps are Exponential with mean 1/512.
inline constexpr double kCandidateRate = 512.0;

enum class MessageType : std::uint8_t { request = 0x00, request_no_return = 0x01, notification = 0x02, response = 0x80 };

/// One SOME/IP-like record. Field widths follow the SOME/IP header.
struct Message {
    std::uint16_t service_id = 0;
    std::uint16_t method_id = 0;
    std::uint32_t length = 8;
    std::uint16_t client_id = 0;
    std::uint16_t session_id = 1;
    std::uint8_t protocol_version = 1;
    std::uint8_t interface_version = 1;
    std::uint8_t message_type = 0;
    std::uint8_t return_code = 0;
    std::uint16_t src_ip_index = 0;
    double timestamp = 0.0;

    bool valid(std::size_t pool_size) const noexcept;
    /// Header fields in wire order followed by the timestamp.
    std::array<double, kFeatureCount> fields() const noexcept;
    static Message from_fields(const std::array<double, kFeatureCount>& f);
};

enum class Label { normal, attack };
std::string to_string(Label label);
Label label_from_string(const std::string& s);

struct Window {
    std::vector<Message> messages;
    Label label = Label::normal;
    int scenario_id = 0;

    /// Throws DataError unless there are exactly 128 ascending messages.
    void validate(std::size_t pool_size) const;
};

// Rate functions g(t) on normalized time t in [0, 1].
struct PlaRate { double a = 2.0, b = 1.0; };
struct DeaRate { double w1 = 1.0, w2 = 1.0, alpha1 = 2.0, alpha2 = 2.0, gamma = 3.0, t1 = 0.6; };
struct AsaRate { double c = 4.0, gamma = 8.0, t0 = 0.5; };
struct DamRate { double w = 0.5, alpha1 = 3.0, alpha2 = 4.0; };
/// monostate: no explicit rate (the DRP sampler draws its own).
using RateParams = std::variant<std::monostate, PlaRate, DeaRate, AsaRate, DamRate>;

// IP-control functions f(t), one per rate strategy.
struct PlaIp { double a = 8.0, b = 1.0; };
struct DeaIp { double n_base = 1.0, k1 = 2.0, k2 = 1.0, mu = 3.0, t1 = 0.6; };
struct AsaIp { double n_max = 5.0, gamma = 10.0, t0 = 0.5; };
struct DamIp {
    double n_base = 1.0, n_max = 5.0, alpha = 0.5, beta = 0.1, gamma = 3.0;
    /// Read the first growth term as alpha * e^(beta t) instead of the
    /// printed time-independent alpha * e^beta.
    bool time_dependent_burst = false;
};
using IpParams = std::variant<PlaIp, DeaIp, AsaIp, DamIp>;

enum class Sampler { npp, nd, drp };

struct AttackScenario {
    RateParams rate;
    IpParams ip;
    Sampler sampler = Sampler::npp;
    std::uint64_t seed = 0;

    void validate() const;
    std::string rate_name() const;  // PLA | DEA | ASA | DAM | "/"
    std::string ip_name() const;
    std::string sampler_name() const;  // NPP | ND | DRP
};

/// The nine STEIA9-style scenario rows (0..8) with default parameters.
AttackScenario scenario_row(int id);
inline constexpr int kScenarioCount = 9;

/// g(t) exactly as tabulated for the scenario's strategy.
double attack_rate(const AttackScenario& scenario, double t);
/// An upper bound on g over [0, 1] (grid maximum over 4097 points plus the
/// branch endpoints, inflated by 1e-3).
double attack_rate_max(const AttackScenario& scenario);
/// floor(f(t)) clamped to >= 1.
std::size_t ip_count(const AttackScenario& scenario, double t);
/// f(t) before flooring.
double ip_control(const AttackScenario& scenario, double t);

using RateFn = std::function<double(double)>;

/// Thinning with Exponential(mean 1/512) candidate gaps; accept when
/// Uniform(0, g_max) < g(t).
std::vector<double> sample_npp(double t_min, double t_max, const RateFn& g, double g_max, Rng& rng);
/// Thinning with |Normal(1/512, 1/1024)| candidate gaps; accept when
/// Uniform(0, 1) < g(t) / g_max.
std::vector<double> sample_nd(double t_min, double t_max, const RateFn& g, double g_max, Rng& rng);

/// Piecewise mixed power-law / exponential intensity with one random weight
/// per third of the interval. Evaluated on normalized time u in [0, 1].
struct DrpIntensity {
    static constexpr double kAlpha1 = 3.0;
    static constexpr double kAlpha2 = 4.0;
    static constexpr std::array<double, 2> kBreakPoints{1.0 / 3.0, 2.0 / 3.0};
    std::array<double, 3> w{};
    double g_max = 0.0;

    static double mixed(double u, double w);
    double operator()(double u) const;
    static DrpIntensity generate(Rng& rng);
};

struct DrpSample {
    std::vector<double> times;
    DrpIntensity intensity;
};

/// Draws a DrpIntensity, then thins NPP-style candidates against it
/// (intensity evaluated at (t - t_min) / (t_max - t_min)).
DrpSample sample_drp(double t_min, double t_max, Rng& rng);

/// Jittered periodic benign schedule: ECU e emits every 1 / rates_hz[e]
/// seconds with +-jitter * period uniform noise and a random phase. A
/// `request_share` of the emissions are requests to a random peer; the
/// rest are notifications of the ECU's own service.
struct BenignSchedule {
    std::vector<double> rates_hz;
    double jitter = 0.1;
    double request_share = 0.5;

    static BenignSchedule defaults(std::size_t dims);
    std::size_t dims() const noexcept { return rates_hz.size(); }
};

/// Per-ECU service table entry: the service an ECU offers.
struct ServiceEntry {
    std::uint16_t service_id;
    std::array<std::uint16_t, 2> request_methods;
    std::uint16_t event_method;
    std::uint32_t request_length;
    std::uint32_t event_length;
};
ServiceEntry service_for(std::size_t ecu);

/// `count` consecutive benign messages, ascending in time.
std::vector<Message> gen_normal_block(const BenignSchedule& schedule, std::size_t count, Rng& rng);
Window gen_normal_window(const BenignSchedule& schedule, std::uint64_t seed);

struct InjectionResult {
    std::vector<Message> messages;
    std::vector<std::uint8_t> injected;  // parallel to messages
    std::size_t injected_count = 0;
};

/// Normalizes the block's time range to [0, 1], samples injection times
/// with the scenario's sampler, and merges one valid message per time.
InjectionResult inject_into_block(const std::vector<Message>& benign, std::size_t pool_size,
                                  const AttackScenario& scenario, Rng& rng);

/// Consecutive full 128-message windows; any window holding an injected
/// message is labeled attack.
std::vector<Window> frame_windows(const InjectionResult& merged, int scenario_id);

struct InjectOutcome {
    Window window;
    bool no_injection = false;
};

/// Single-window form: inject over the window's own span and keep the first
/// 128 merged messages. With zero injections the input comes back labeled
/// normal and flagged.
InjectOutcome inject_attack(const Window& w, std::size_t pool_size, const AttackScenario& scenario);

/// Per-dimension (source ECU) timestamps relative to the window's first message.
EventSequences window_events(const Window& w, std::size_t dims);

// ---- dataset ----

struct DatasetConfig {
    std::vector<int> scenarios{0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::size_t count = 100;  // windows per scenario, half normal, half attack
    std::size_t dims = 6;
    std::uint64_t master_seed = 2024;
    double train_fraction = 0.8;
    std::size_t block_windows = 3;
    std::size_t workers = 1;
};

struct DatasetRecord {
    std::string window_id;
    std::string split;  // train | val
    Window window;
};

struct Dataset {
    std::vector<DatasetRecord> train;
    std::vector<DatasetRecord> val;
};

Dataset generate_dataset(const DatasetConfig& cfg);

std::string record_to_json_line(const DatasetRecord& r);
DatasetRecord record_from_json_line(const std::string& line);

/// Writes <dir>/train.jsonl, <dir>/val.jsonl and <dir>/manifest.json.
void write_dataset(const std::string& dir, const Dataset& ds, const DatasetConfig& cfg);
Dataset read_dataset(const std::string& dir);
/// Reads a single .jsonl split file.
std::vector<DatasetRecord> read_split(const std::string& path);

Dataset build_dataset(const DatasetConfig& cfg, const std::string& out_dir);

}  // namespace mdhp::traffic
