#pragma once

// Generated by make_reference.py (mpmath, 40 digits). Do not edit.

namespace ref {

// 13C (130/228 MHz axial) at 140 G, 26 deg; ascending, MHz
inline constexpr double c13_140g_levels[6] = {
    -1953.63538056671975897181,
    -1925.580730504395061420565,
    557.7753255511192569546414,
    678.4300914089626458888433,
    1260.555146781970183040351,
    1382.455547329062734508539};

// same field, hyperfine off
inline constexpr double bare_140g_levels[6] = {
    -1930.469286401010277955009,
    -1930.319416401010277955009,
    612.9927966107470934141705,
    613.1426666107470934141705,
    1317.251684790263184540838,
    1317.401554790263184540838};

// 13C + 14N (A = 2, P = 5) at 80 G, 20 deg
inline constexpr double c13_n14_80g_levels[18] = {
    -1940.87768977126183578447,
    -1935.88153063216255808411,
    -1935.826645596672906170426,
    -1928.368901194116146765621,
    -1923.392698153136571864938,
    -1923.346601984433980151521,
    691.7628406856464966449464,
    694.7495792859024165991877,
    698.7759470905513561431743,
    812.1325933450155853727822,
    815.1114986435562778642782,
    819.1540157504613381799948,
    1111.983045577482028533415,
    1115.014072545138156737664,
    1118.951982982002690821551,
    1233.352839400915604323106,
    1236.377416561593286507637,
    1240.328235463518761093348};

// theta at 80 G where the m_s = 0 doublet splits by exactly 12 MHz
inline constexpr double theta_12mhz_80g_deg = 19.17161108966858053757708;

} // namespace ref
