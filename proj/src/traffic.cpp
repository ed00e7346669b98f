#include "mdhp/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mdhp::traffic {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

// ---- Message / Window ----

bool Message::valid(std::size_t pool_size) const noexcept {
    const bool known_type = message_type == 0x00 || message_type == 0x01 || message_type == 0x02 ||
                            message_type == 0x80 || message_type == 0x81;
    return src_ip_index < pool_size && protocol_version == 1 && known_type && length >= 8 &&
           session_id != 0 && std::isfinite(timestamp) && timestamp >= 0.0;
}

std::array<double, kFeatureCount> Message::fields() const noexcept {
    return {static_cast<double>(service_id),     static_cast<double>(method_id),
            static_cast<double>(length),         static_cast<double>(client_id),
            static_cast<double>(session_id),     static_cast<double>(protocol_version),
            static_cast<double>(interface_version), static_cast<double>(message_type),
            static_cast<double>(return_code),    static_cast<double>(src_ip_index),
            timestamp};
}

Message Message::from_fields(const std::array<double, kFeatureCount>& f) {
    auto as_uint = [&](std::size_t k, double max) {
        const double v = f[k];
        if (!(v >= 0.0) || v > max || v != std::floor(v)) {
            throw DataError("message field " + std::to_string(k) + " out of range: " + std::to_string(v));
        }
        return v;
    };
    Message m;
    m.service_id = static_cast<std::uint16_t>(as_uint(0, 0xffff));
    m.method_id = static_cast<std::uint16_t>(as_uint(1, 0xffff));
    m.length = static_cast<std::uint32_t>(as_uint(2, 0xffffffff));
    m.client_id = static_cast<std::uint16_t>(as_uint(3, 0xffff));
    m.session_id = static_cast<std::uint16_t>(as_uint(4, 0xffff));
    m.protocol_version = static_cast<std::uint8_t>(as_uint(5, 0xff));
    m.interface_version = static_cast<std::uint8_t>(as_uint(6, 0xff));
    m.message_type = static_cast<std::uint8_t>(as_uint(7, 0xff));
    m.return_code = static_cast<std::uint8_t>(as_uint(8, 0xff));
    m.src_ip_index = static_cast<std::uint16_t>(as_uint(9, 0xffff));
    m.timestamp = f[10];
    if (!std::isfinite(m.timestamp) || m.timestamp < 0.0) throw DataError("message timestamp invalid");
    return m;
}

std::string to_string(Label label) { return label == Label::attack ? "attack" : "normal"; }

Label label_from_string(const std::string& s) {
    if (s == "attack") return Label::attack;
    if (s == "normal") return Label::normal;
    throw DataError("unknown label '" + s + "'");
}

void Window::validate(std::size_t pool_size) const {
    if (messages.size() != kWindowSize) {
        throw DataError("window holds " + std::to_string(messages.size()) + " messages, expected 128");
    }
    for (std::size_t k = 0; k < messages.size(); ++k) {
        if (!messages[k].valid(pool_size)) throw DataError("window message " + std::to_string(k) + " invalid");
        if (k > 0 && messages[k].timestamp < messages[k - 1].timestamp) {
            throw DataError("window timestamps not ascending");
        }
    }
}

// ---- scenarios ----

void AttackScenario::validate() const {
    std::visit(overloaded{
                   [](std::monostate) {},
                   [](const PlaRate& r) { require(r.a >= 0.0 && r.b >= 0.0, "PLA rate needs a >= 0, b >= 0"); },
                   [](const DeaRate& r) {
                       require(r.w1 >= 0.0 && r.w2 >= 0.0 && r.alpha1 >= 1.0 && r.alpha2 >= 0.0,
                               "DEA rate needs W1, W2, alpha2 >= 0 and alpha1 >= 1");
                       require(r.t1 >= 0.0 && r.t1 <= 1.0, "DEA t1 must lie in [0, 1]");
                   },
                   [](const AsaRate& r) { require(r.c >= 0.0, "ASA rate needs C >= 0"); },
                   [](const DamRate& r) {
                       require(r.w >= 0.0 && r.w <= 1.0, "DAM weight w must lie in [0, 1]");
                       require(r.alpha1 >= 1.0 && r.alpha2 >= 0.0, "DAM rate needs alpha1 >= 1, alpha2 >= 0");
                   },
               },
               rate);
    std::visit(overloaded{
                   [](const PlaIp& p) { require(p.a >= 0.0 && p.b > -1.0, "PLA ip control needs a >= 0, b > -1"); },
                   [](const DeaIp& p) {
                       require(p.n_base >= 1.0 && p.k1 >= 0.0 && p.k2 >= 0.0, "DEA ip control needs n_base >= 1");
                   },
                   [](const AsaIp& p) { require(p.n_max >= 1.0, "ASA ip control needs n_max >= 1"); },
                   [](const DamIp& p) {
                       require(p.n_base >= 1.0 && p.n_max >= p.n_base, "DAM ip control needs 1 <= n_base <= n_max");
                       require(p.alpha >= 0.0 && p.alpha <= 1.0, "DAM ip control alpha must lie in [0, 1]");
                       require(p.beta > 0.0 && p.gamma > 0.0, "DAM ip control needs beta, gamma > 0");
                   },
               },
               ip);
    if (std::holds_alternative<std::monostate>(rate) && sampler != Sampler::drp) {
        throw ConfigError("a scenario without a rate function must use the DRP sampler");
    }
}

std::string AttackScenario::rate_name() const {
    return std::visit(overloaded{[](std::monostate) { return std::string("/"); },
                                 [](const PlaRate&) { return std::string("PLA"); },
                                 [](const DeaRate&) { return std::string("DEA"); },
                                 [](const AsaRate&) { return std::string("ASA"); },
                                 [](const DamRate&) { return std::string("DAM"); }},
                      rate);
}

std::string AttackScenario::ip_name() const {
    return std::visit(overloaded{[](const PlaIp&) { return std::string("PLA"); },
                                 [](const DeaIp&) { return std::string("DEA"); },
                                 [](const AsaIp&) { return std::string("ASA"); },
                                 [](const DamIp&) { return std::string("DAM"); }},
                      ip);
}

std::string AttackScenario::sampler_name() const {
    switch (sampler) {
        case Sampler::npp: return "NPP";
        case Sampler::nd: return "ND";
        case Sampler::drp: return "DRP";
    }
    return "?";
}

AttackScenario scenario_row(int id) {
    AttackScenario s;
    const Sampler sampler = id <= 4 ? Sampler::npp : Sampler::nd;
    switch (id) {
        case 0: case 5: s.rate = PlaRate{}; s.ip = PlaIp{}; break;
        case 1: case 6: s.rate = DeaRate{}; s.ip = DeaIp{}; break;
        case 2: case 7: s.rate = AsaRate{}; s.ip = AsaIp{}; break;
        case 3: case 8: s.rate = DamRate{}; s.ip = DamIp{}; break;
        case 4: s.rate = std::monostate{}; s.ip = DamIp{}; break;
        default: throw ConfigError("scenario id must be in 0..8, got " + std::to_string(id));
    }
    s.sampler = id == 4 ? Sampler::drp : sampler;
    return s;
}

double attack_rate(const AttackScenario& scenario, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("attack_rate: t must lie in [0, 1]");
    const double g = std::visit(
        overloaded{
            [](std::monostate) -> double { throw ConfigError("scenario has no explicit rate function"); },
            [t](const PlaRate& r) { return r.a * std::pow(t, r.b); },
            [t](const DeaRate& r) {
                return t < r.t1 ? r.w1 * r.alpha1 * std::pow(t, r.alpha1 - 1.0)
                                : r.w2 * r.alpha2 * std::exp(r.gamma * (t - r.t1));
            },
            [t](const AsaRate& r) {
                const double denom = 1.0 + std::exp(r.gamma * (t - r.t0));
                return r.c * std::exp(r.gamma * t) / (denom * denom);
            },
            [t](const DamRate& r) { return r.w * r.alpha1 * std::pow(t, r.alpha1 - 1.0) +
                                           (1.0 - r.w) * r.alpha2 * std::exp(r.alpha2 * t); },
        },
        scenario.rate);
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("attack_rate: parameters yield a negative or non-finite rate");
    return g;
}

double attack_rate_max(const AttackScenario& scenario) {
    constexpr int kGrid = 4096;
    double best = 0.0;
    for (int k = 0; k <= kGrid; ++k) {
        best = std::max(best, attack_rate(scenario, static_cast<double>(k) / kGrid));
    }
    if (const auto* dea = std::get_if<DeaRate>(&scenario.rate)) {
        // left limit of the power-law branch at t1
        best = std::max(best, dea->w1 * dea->alpha1 * std::pow(dea->t1, dea->alpha1 - 1.0));
    }
    if (const auto* asa = std::get_if<AsaRate>(&scenario.rate)) {
        if (asa->t0 >= 0.0 && asa->t0 <= 1.0) best = std::max(best, attack_rate(scenario, asa->t0));
    }
    return best * (1.0 + 1e-3);
}

double ip_control(const AttackScenario& scenario, double t) {
    return std::visit(
        overloaded{
            [t](const PlaIp& p) { return p.a / (p.b + 1.0) * std::pow(t, p.b + 1.0); },
            [t](const DeaIp& p) {
                return t < p.t1 ? p.n_base + p.k1 * t
                                : p.n_base + p.k1 * p.t1 + p.k2 * (std::exp(p.mu * (t - p.t1)) - 1.0);
            },
            [t](const AsaIp& p) { return p.n_max / (1.0 + std::exp(-p.gamma * (t - p.t0))); },
            [t](const DamIp& p) {
                const double burst = p.time_dependent_burst ? std::exp(p.beta * t) : std::exp(p.beta);
                return p.n_base + (p.n_max - p.n_base) * (p.alpha * burst + (1.0 - p.alpha) * (1.0 - std::exp(-p.gamma * t)));
            },
        },
        scenario.ip);
}

std::size_t ip_count(const AttackScenario& scenario, double t) {
    const double f = ip_control(scenario, t);
    if (!std::isfinite(f) || f < 1.0) return 1;
    if (f > 1e9) return static_cast<std::size_t>(1e9);
    return static_cast<std::size_t>(std::floor(f));
}

// ---- samplers ----

std::vector<double> sample_npp(double t_min, double t_max, const RateFn& g, double g_max, Rng& rng) {
    std::vector<double> out;
    if (!(t_min < t_max)) return out;
    if (!(g_max > 0.0)) throw ConfigError("sample_npp: g_max must be positive");
    double t = t_min;
    while (t < t_max) {
        t += rng.exponential_mean(1.0 / kCandidateRate);
        if (t > t_max) break;
        if (rng.uniform(0.0, g_max) < g(t)) out.push_back(t);
    }
    return out;
}

std::vector<double> sample_nd(double t_min, double t_max, const RateFn& g, double g_max, Rng& rng) {
    std::vector<double> out;
    if (!(t_min < t_max)) return out;
    if (!(g_max > 0.0)) throw ConfigError("sample_nd: g_max must be positive");
    constexpr double mu = 1.0 / kCandidateRate;
    constexpr double sigma = mu / 2.0;
    double t = t_min;
    while (t < t_max) {
        t += std::abs(rng.normal(mu, sigma));
        if (t > t_max) break;
        if (rng.uniform() < g(t) / g_max) out.push_back(t);
    }
    return out;
}

double DrpIntensity::mixed(double u, double w) {
    return w * kAlpha1 * std::pow(u, kAlpha1 - 1.0) + (1.0 - w) * kAlpha2 * std::exp(kAlpha2 * u);
}

double DrpIntensity::operator()(double u) const {
    if (u < kBreakPoints[0]) return mixed(u, w[0]);
    if (u < kBreakPoints[1]) return mixed(u, w[1]);
    return mixed(u, w[2]);
}

DrpIntensity DrpIntensity::generate(Rng& rng) {
    DrpIntensity g;
    g.w = {rng.uniform(0.0, 0.33), rng.uniform(0.33, 0.66), rng.uniform(0.66, 1.0)};
    constexpr int kGrid = 1024;
    double best = 0.0;
    for (int k = 0; k <= kGrid; ++k) best = std::max(best, g(static_cast<double>(k) / kGrid));
    // each piece increases in u, so its supremum sits at the closing break point
    best = std::max(best, mixed(kBreakPoints[0], g.w[0]));
    best = std::max(best, mixed(kBreakPoints[1], g.w[1]));
    g.g_max = best;
    return g;
}

DrpSample sample_drp(double t_min, double t_max, Rng& rng) {
    DrpSample s;
    s.intensity = DrpIntensity::generate(rng);
    if (!(t_min < t_max)) return s;
    const double span = t_max - t_min;
    const DrpIntensity& g = s.intensity;
    s.times = sample_npp(t_min, t_max, [&](double t) { return g(std::clamp((t - t_min) / span, 0.0, 1.0)); },
                         g.g_max, rng);
    return s;
}

// ---- benign traffic ----

BenignSchedule BenignSchedule::defaults(std::size_t dims) {
    BenignSchedule s;
    for (std::size_t e = 0; e < dims; ++e) s.rates_hz.push_back(100.0 / static_cast<double>(e + 1));
    return s;
}

ServiceEntry service_for(std::size_t ecu) {
    const auto e = static_cast<std::uint16_t>(ecu);
    return ServiceEntry{static_cast<std::uint16_t>(0x1000 + 0x10 * e),
                        {static_cast<std::uint16_t>(0x0001 + 2 * (e % 4)), static_cast<std::uint16_t>(0x0002 + 2 * (e % 4))},
                        static_cast<std::uint16_t>(0x8001 + e % 8),
                        static_cast<std::uint32_t>(16 + 4 * (e % 5)),
                        static_cast<std::uint32_t>(24 + 8 * (e % 3))};
}

namespace {

std::uint16_t next_session(std::uint16_t s) { return s == 0xffff ? 1 : static_cast<std::uint16_t>(s + 1); }

std::uint16_t random_session(Rng& rng) { return static_cast<std::uint16_t>(1 + rng.below(0xffff)); }

Message request_message(std::size_t src, std::size_t dst, std::uint16_t session, double t, Rng& rng) {
    const ServiceEntry svc = service_for(dst);
    Message m;
    m.service_id = svc.service_id;
    m.method_id = svc.request_methods[rng.below(2)];
    m.length = svc.request_length;
    m.client_id = static_cast<std::uint16_t>(0x0100 + src);
    m.session_id = session;
    m.message_type = static_cast<std::uint8_t>(MessageType::request);
    m.src_ip_index = static_cast<std::uint16_t>(src);
    m.timestamp = t;
    return m;
}

}  // namespace

std::vector<Message> gen_normal_block(const BenignSchedule& schedule, std::size_t count, Rng& rng) {
    const std::size_t dims = schedule.dims();
    if (dims < 2) throw ConfigError("benign traffic needs at least 2 ECUs");
    for (double r : schedule.rates_hz) {
        if (!(r > 0.0)) throw ConfigError("benign rates must be positive");
    }
    if (!(schedule.jitter >= 0.0 && schedule.jitter < 0.5)) throw ConfigError("jitter must lie in [0, 0.5)");
    if (!(schedule.request_share >= 0.0 && schedule.request_share <= 1.0)) {
        throw ConfigError("request_share must lie in [0, 1]");
    }

    const double total_rate = std::accumulate(schedule.rates_hz.begin(), schedule.rates_hz.end(), 0.0);
    const double max_period = 1.0 / *std::min_element(schedule.rates_hz.begin(), schedule.rates_hz.end());
    const double horizon = 1.5 * static_cast<double>(count) / total_rate + 2.0 * max_period;

    struct Tick {
        double t;
        std::size_t ecu;
    };
    std::vector<Tick> ticks;
    for (std::size_t e = 0; e < dims; ++e) {
        const double period = 1.0 / schedule.rates_hz[e];
        const double phase = rng.uniform(0.0, period);
        for (std::size_t k = 0;; ++k) {
            const double nominal = period + phase + static_cast<double>(k) * period;
            if (nominal > horizon) break;
            ticks.push_back({nominal + rng.uniform(-schedule.jitter, schedule.jitter) * period, e});
        }
    }
    std::stable_sort(ticks.begin(), ticks.end(), [](const Tick& a, const Tick& b) { return a.t < b.t; });
    if (ticks.size() < count) throw ConfigError("benign schedule horizon too short");  // not reachable with 1.5x slack
    ticks.resize(count);

    std::vector<std::uint16_t> sessions(dims);
    for (auto& s : sessions) s = random_session(rng);
    std::vector<Message> out;
    out.reserve(count);
    for (const Tick& tick : ticks) {
        const std::size_t e = tick.ecu;
        sessions[e] = next_session(sessions[e]);
        if (rng.uniform() >= schedule.request_share) {
            const ServiceEntry svc = service_for(e);
            Message m;
            m.service_id = svc.service_id;
            m.method_id = svc.event_method;
            m.length = svc.event_length;
            m.client_id = 0;
            m.session_id = sessions[e];
            m.message_type = static_cast<std::uint8_t>(MessageType::notification);
            m.src_ip_index = static_cast<std::uint16_t>(e);
            m.timestamp = tick.t;
            out.push_back(m);
        } else {
            std::size_t peer = rng.below(dims - 1);
            if (peer >= e) ++peer;
            out.push_back(request_message(e, peer, sessions[e], tick.t, rng));
        }
    }
    return out;
}

Window gen_normal_window(const BenignSchedule& schedule, std::uint64_t seed) {
    Rng rng(seed);
    Window w;
    w.messages = gen_normal_block(schedule, kWindowSize, rng);
    w.label = Label::normal;
    return w;
}

// ---- injection ----

InjectionResult inject_into_block(const std::vector<Message>& benign, std::size_t pool_size,
                                  const AttackScenario& scenario, Rng& rng) {
    scenario.validate();
    if (pool_size < 2) throw ConfigError("inject: pool needs at least 2 ECUs");
    InjectionResult res;
    if (benign.empty()) return res;
    const double t_first = benign.front().timestamp;
    const double t_last = benign.back().timestamp;
    const double span = t_last - t_first;

    std::vector<double> times;
    if (span > 0.0) {
        switch (scenario.sampler) {
            case Sampler::npp:
            case Sampler::nd: {
                const double g_max = attack_rate_max(scenario);
                if (g_max > 0.0) {
                    const RateFn g = [&](double t) { return attack_rate(scenario, t); };
                    times = scenario.sampler == Sampler::npp ? sample_npp(0.0, 1.0, g, g_max, rng)
                                                             : sample_nd(0.0, 1.0, g, g_max, rng);
                }
                break;
            }
            case Sampler::drp: times = sample_drp(0.0, 1.0, rng).times; break;
        }
    }

    std::vector<Message> injected;
    injected.reserve(times.size());
    for (double u : times) {
        const std::size_t controlled = std::min(ip_count(scenario, u), pool_size);
        const std::size_t src = rng.below(controlled);
        std::size_t dst = rng.below(pool_size - 1);
        if (dst >= src) ++dst;
        injected.push_back(request_message(src, dst, random_session(rng), t_first + u * span, rng));
    }

    res.messages.reserve(benign.size() + injected.size());
    res.injected.reserve(benign.size() + injected.size());
    std::size_t a = 0;
    std::size_t b = 0;
    while (a < benign.size() || b < injected.size()) {
        const bool take_benign = b >= injected.size() ||
                                 (a < benign.size() && benign[a].timestamp <= injected[b].timestamp);
        if (take_benign) {
            res.messages.push_back(benign[a++]);
            res.injected.push_back(0);
        } else {
            res.messages.push_back(injected[b++]);
            res.injected.push_back(1);
        }
    }
    res.injected_count = injected.size();
    return res;
}

std::vector<Window> frame_windows(const InjectionResult& merged, int scenario_id) {
    std::vector<Window> out;
    for (std::size_t start = 0; start + kWindowSize <= merged.messages.size(); start += kWindowSize) {
        Window w;
        w.scenario_id = scenario_id;
        w.messages.assign(merged.messages.begin() + static_cast<std::ptrdiff_t>(start),
                          merged.messages.begin() + static_cast<std::ptrdiff_t>(start + kWindowSize));
        const bool any = std::any_of(merged.injected.begin() + static_cast<std::ptrdiff_t>(start),
                                     merged.injected.begin() + static_cast<std::ptrdiff_t>(start + kWindowSize),
                                     [](std::uint8_t f) { return f != 0; });
        w.label = any ? Label::attack : Label::normal;
        out.push_back(std::move(w));
    }
    return out;
}

InjectOutcome inject_attack(const Window& w, std::size_t pool_size, const AttackScenario& scenario) {
    if (w.label != Label::normal) throw ConfigError("inject_attack expects a normal window");
    Rng rng(scenario.seed);
    const InjectionResult merged = inject_into_block(w.messages, pool_size, scenario, rng);
    InjectOutcome out;
    if (merged.injected_count == 0) {
        out.window = w;
        out.no_injection = true;
        return out;
    }
    out.window.scenario_id = w.scenario_id;
    const std::size_t keep = std::min(kWindowSize, merged.messages.size());
    out.window.messages.assign(merged.messages.begin(), merged.messages.begin() + static_cast<std::ptrdiff_t>(keep));
    const bool any = std::any_of(merged.injected.begin(), merged.injected.begin() + static_cast<std::ptrdiff_t>(keep),
                                 [](std::uint8_t f) { return f != 0; });
    out.window.label = any ? Label::attack : Label::normal;
    out.no_injection = !any;
    return out;
}

EventSequences window_events(const Window& w, std::size_t dims) {
    std::vector<std::vector<double>> times(dims);
    if (w.messages.empty()) return EventSequences(std::move(times), 0.0);
    const double t0 = w.messages.front().timestamp;
    double t_end = 0.0;
    for (const Message& m : w.messages) {
        if (m.src_ip_index >= dims) throw DataError("message source index exceeds dims");
        const double t = std::max(0.0, m.timestamp - t0);
        times[m.src_ip_index].push_back(t);
        t_end = std::max(t_end, t);
    }
    return EventSequences(std::move(times), t_end);
}

// ---- dataset ----

namespace {

std::string window_id(int scenario, char kind, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%02d-%c%05zu", scenario, kind, index);
    return buf;
}

Window make_attack_window(const DatasetConfig& cfg, const AttackScenario& scenario, int scenario_id,
                          std::size_t index) {
    const BenignSchedule schedule = BenignSchedule::defaults(cfg.dims);
    for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        Rng rng(derive_seed(scenario.seed, "attack-window", index * 1000 + attempt));
        const auto benign = gen_normal_block(schedule, kWindowSize * cfg.block_windows, rng);
        const InjectionResult merged = inject_into_block(benign, cfg.dims, scenario, rng);
        std::vector<Window> frames = frame_windows(merged, scenario_id);
        std::vector<std::size_t> attacked;
        for (std::size_t k = 0; k < frames.size(); ++k) {
            if (frames[k].label == Label::attack) attacked.push_back(k);
        }
        if (attacked.empty()) continue;
        return std::move(frames[attacked[rng.below(attacked.size())]]);
    }
    throw DataError("scenario " + std::to_string(scenario_id) + " produced no injections in 100 attempts");
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& cfg) {
    if (cfg.dims < 2) throw ConfigError("dataset dims must be >= 2");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
    if (cfg.block_windows < 1) throw ConfigError("block_windows must be >= 1");

    struct Task {
        int scenario;
        Label label;
        std::size_t index;
        bool train;
    };
    std::vector<Task> tasks;
    for (int id : cfg.scenarios) {
        scenario_row(id);  // validates the id
        const std::size_t n_normal = cfg.count / 2;
        const std::size_t n_attack = cfg.count - n_normal;
        const auto n_train = [&](std::size_t n) {
            return static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(n)));
        };
        for (std::size_t k = 0; k < n_normal; ++k) tasks.push_back({id, Label::normal, k, k < n_train(n_normal)});
        for (std::size_t k = 0; k < n_attack; ++k) tasks.push_back({id, Label::attack, k, k < n_train(n_attack)});
    }

    std::vector<DatasetRecord> records(tasks.size());
    const auto n = static_cast<long long>(tasks.size());
    const int threads = static_cast<int>(std::max<std::size_t>(cfg.workers, 1));
    std::vector<std::string> errors(tasks.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
    for (long long t = 0; t < n; ++t) {
        const Task& task = tasks[static_cast<std::size_t>(t)];
        DatasetRecord& rec = records[static_cast<std::size_t>(t)];
        try {
            AttackScenario scenario = scenario_row(task.scenario);
            scenario.seed = derive_seed(cfg.master_seed, "scenario", static_cast<std::uint64_t>(task.scenario));
            rec.split = task.train ? "train" : "val";
            if (task.label == Label::normal) {
                rec.window_id = window_id(task.scenario, 'n', task.index);
                rec.window = gen_normal_window(BenignSchedule::defaults(cfg.dims),
                                               derive_seed(scenario.seed, "normal-window", task.index));
            } else {
                rec.window_id = window_id(task.scenario, 'a', task.index);
                rec.window = make_attack_window(cfg, scenario, task.scenario, task.index);
            }
            rec.window.scenario_id = task.scenario;
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(t)] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw DataError(e);
    }

    Dataset ds;
    for (auto& rec : records) (rec.split == "train" ? ds.train : ds.val).push_back(std::move(rec));
    auto shuffle = [&](std::vector<DatasetRecord>& v, const char* tag) {
        Rng rng(derive_seed(cfg.master_seed, tag));
        for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[rng.below(k)]);
    };
    shuffle(ds.train, "shuffle-train");
    shuffle(ds.val, "shuffle-val");
    return ds;
}

std::string record_to_json_line(const DatasetRecord& r) {
    nlohmann::ordered_json j;
    j["window_id"] = r.window_id;
    j["scenario_id"] = r.window.scenario_id;
    j["split"] = r.split;
    j["label"] = to_string(r.window.label);
    nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
    for (const Message& m : r.window.messages) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        const auto f = m.fields();
        for (std::size_t k = 0; k + 1 < kFeatureCount; ++k) row.push_back(static_cast<std::uint64_t>(f[k]));
        row.push_back(m.timestamp);
        msgs.push_back(std::move(row));
    }
    j["messages"] = std::move(msgs);
    return j.dump();
}

DatasetRecord record_from_json_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        DatasetRecord r;
        r.window_id = j.value("window_id", std::string{});
        r.split = j.at("split").get<std::string>();
        r.window.scenario_id = j.at("scenario_id").get<int>();
        r.window.label = label_from_string(j.at("label").get<std::string>());
        for (const auto& row : j.at("messages")) {
            if (row.size() != kFeatureCount) throw DataError("message row must have 11 entries");
            std::array<double, kFeatureCount> f{};
            for (std::size_t k = 0; k < kFeatureCount; ++k) f[k] = row.at(k).get<double>();
            r.window.messages.push_back(Message::from_fields(f));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed dataset record: ") + e.what());
    }
}

namespace {

void write_lines(const std::string& path, const std::vector<DatasetRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& r : records) out << record_to_json_line(r) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace

void write_dataset(const std::string& dir, const Dataset& ds, const DatasetConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    write_lines(dir + "/train.jsonl", ds.train);
    write_lines(dir + "/val.jsonl", ds.val);

    nlohmann::ordered_json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["config"] = {{"scenarios", cfg.scenarios},   {"count", cfg.count},
                          {"dims", cfg.dims},             {"master_seed", cfg.master_seed},
                          {"train_fraction", cfg.train_fraction}, {"block_windows", cfg.block_windows}};
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int id : cfg.scenarios) {
        const AttackScenario s = scenario_row(id);
        std::size_t n_train = 0;
        std::size_t n_val = 0;
        for (const auto& r : ds.train) n_train += r.window.scenario_id == id;
        for (const auto& r : ds.val) n_val += r.window.scenario_id == id;
        char id_buf[8];
        std::snprintf(id_buf, sizeof id_buf, "%02d", id);
        rows.push_back(nlohmann::ordered_json{{"ID", id_buf},
                                              {"Train", n_train},
                                              {"Val", n_val},
                                              {"Attk Rate", s.rate_name()},
                                              {"IP Ctrl", s.ip_name()},
                                              {"Sample", s.sampler_name()}});
    }
    manifest["scenarios"] = std::move(rows);
    const std::string path = dir + "/manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

std::vector<DatasetRecord> read_split(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<DatasetRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(record_from_json_line(line));
    }
    return out;
}

Dataset read_dataset(const std::string& dir) {
    Dataset ds;
    ds.train = read_split(dir + "/train.jsonl");
    ds.val = read_split(dir + "/val.jsonl");
    return ds;
}

Dataset build_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
    Dataset ds = generate_dataset(cfg);
    write_dataset(out_dir, ds, cfg);
    return ds;
}

}  // namespace mdhp::traffic
