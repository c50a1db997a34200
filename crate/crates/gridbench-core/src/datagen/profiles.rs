//! Shipped default load-profile coefficients: 12 months x {workday, weekend},
//! degree-10 polynomials over normalized time of day, indexed
//! (month-1)*2 + day_type. Values produce a morning shoulder and an
//! evening peak, higher in winter; every experiment can override them
//! from its run config.

pub(crate) const DEFAULT_COEFFS: [[f64; 11]; 24] = [
    // month 1, workday
    [0.15129848041037142, 1.3950912514587799, -29.76234961258058, 202.48444654259342, -398.87074352286135, -351.37215271384343, 2062.0955144345708, -2080.182100901101, -49.0626452304356, 1047.1458280087645, -403.77144869715477],
    // month 1, weekend
    [0.17871231524117617, 0.7799528149362754, -29.087624427824807, 438.57787933472764, -3396.008477363912, 15027.421539826923, -39345.86099606671, 61742.61320127085, -56907.82318980215, 28368.78646242061, -5899.313423921713],
    // month 2, workday
    [0.1499215141776739, 1.3394864190768356, -27.85611792048716, 176.29124794826254, -214.03181874068767, -1101.4782002689574, 3906.9218422678355, -4865.600490770998, 2466.487727076147, -196.99461083555147, -144.98074908502934],
    // month 2, weekend
    [0.17721001209773643, 0.7481426339897134, -28.00681714137677, 423.8512808919341, -3292.954617172262, 14612.836519174467, -38335.77551001577, 60233.56830505333, -55561.41625389907, 27712.030408856066, -5764.798703635018],
    // month 3, workday
    [0.14615957246934677, 1.1875711918637606, -22.64819608668987, 104.73009857580485, 290.9575149806279, -3150.8060332542445, 8947.08110104911, -12475.50505223236, 9339.099153216623, -3596.049501509302, 562.0485907816004],
    // month 3, weekend
    [0.17310564358027347, 0.6612356034482801, -25.053996721612187, 383.6174657235642, -3011.406235212563, 13480.169178694994, -35576.17064213678, 56110.78097768461, -51882.964097348806, 25917.73950233935, -5397.297653445854],
    // month 4, workday
    [0.1410206645294878, 0.9800511322675841, -15.534042560800257, 6.9757506090169725, 980.7857734841123, -5950.23991379463, 15832.06668766362, -22870.828003563576, 18727.26095166366, -8239.24483102737, 1527.8686302603555],
    // month 4, weekend
    [0.16749897191590865, 0.5425183919597919, -21.020369015397396, 328.6570521123981, -2626.803993061184, 11932.91681756294, -31806.48028820661, 50478.948754098055, -46858.10500489519, 23466.692542257988, -4895.281882969975],
    // month 5, workday
    [0.1358817565896967, 0.7725310726743133, -8.41988903491099, -90.77859735777615, 1670.6140319876067, -8749.673794335067, 22717.052274278252, -33266.150954895005, 28115.4227501109, -12882.44016054553, 2493.6886697391324],
    // month 5, weekend
    [0.16189230025797935, 0.4238011804740535, -16.98674130918551, 273.696638501244, -2242.2017509098587, 10385.664456431059, -28036.78993427679, 44847.116530511965, -41833.24591244196, 21015.645582176785, -4393.266112494125],
    // month 6, workday
    [0.13211981488126043, 0.6206158454597314, -3.211967201113423, -162.33974673023206, 2175.603365708914, -10799.001627320324, 27757.21153305948, -40876.05551635629, 34988.03417625131, -16281.495051219255, 3200.718009605757],
    // month 6, weekend
    [0.15778793173977765, 0.3368941499308916, -14.033920889417793, 233.46282333287255, -1960.6533689501457, 9252.99711595152, -25277.185066397677, 40724.3292031431, -38154.793755891595, 19221.35467566004, -4025.765062304961],
    // month 7, workday
    [0.13074284864920432, 0.5650110130785406, -1.3057355090208784, -188.5329453245614, 2360.4422904910793, -11549.107674875411, 29602.037860892677, -43661.47390622611, 37503.58454855784, -17525.635490063538, 3459.5087092178765],
    // month 7, weekend
    [0.15628562859633788, 0.30508396898351925, -12.953113602973543, 218.73622489008, -1857.599508758483, 8838.412095299045, -24267.09958034672, 39215.28430692556, -36808.3868199885, 18564.5986220955, -3891.250342018264],
    // month 8, workday
    [0.13211981488126043, 0.6206158454597314, -3.211967201113423, -162.33974673023206, 2175.603365708914, -10799.001627320324, 27757.21153305948, -40876.05551635629, 34988.03417625131, -16281.495051219255, 3200.718009605757],
    // month 8, weekend
    [0.15778793173977765, 0.3368941499308916, -14.033920889417793, 233.46282333287255, -1960.6533689501457, 9252.99711595152, -25277.185066397677, 40724.3292031431, -38154.793755891595, 19221.35467566004, -4025.765062304961],
    // month 9, workday
    [0.13588175658804885, 0.7725310726727169, -8.41988903491185, -90.77859735777189, 1670.6140319876001, -8749.673794335045, 22717.052274278227, -33266.150954894976, 28115.42275011087, -12882.44016054551, 2493.6886697391274],
    // month 9, weekend
    [0.1618923002569905, 0.4238011804753138, -16.98674130918615, 273.69663850124215, -2242.2017509098455, 10385.664456431037, -28036.789934276738, 44847.11653051191, -41833.24591244192, 21015.645582176774, -4393.266112494125],
    // month 10, workday
    [0.1410206645294878, 0.9800511322675841, -15.534042560800257, 6.9757506090169725, 980.7857734841123, -5950.23991379463, 15832.06668766362, -22870.828003563576, 18727.26095166366, -8239.24483102737, 1527.8686302603555],
    // month 10, weekend
    [0.16749897191590865, 0.5425183919597919, -21.020369015397396, 328.6570521123981, -2626.803993061184, 11932.91681756294, -31806.48028820661, 50478.948754098055, -46858.10500489519, 23466.692542257988, -4895.281882969975],
    // month 11, workday
    [0.14615957246934677, 1.1875711918637606, -22.64819608668987, 104.73009857580485, 290.9575149806279, -3150.8060332542445, 8947.08110104911, -12475.50505223236, 9339.099153216623, -3596.049501509302, 562.0485907816004],
    // month 11, weekend
    [0.17310564358027347, 0.6612356034482801, -25.053996721612187, 383.6174657235642, -3011.406235212563, 13480.169178694994, -35576.17064213678, 56110.78097768461, -51882.964097348806, 25917.73950233935, -5397.297653445854],
    // month 12, workday
    [0.1499215141776739, 1.3394864190768356, -27.85611792048716, 176.29124794826254, -214.03181874068767, -1101.4782002689574, 3906.9218422678355, -4865.600490770998, 2466.487727076147, -196.99461083555147, -144.98074908502934],
    // month 12, weekend
    [0.17721001209773643, 0.7481426339897134, -28.00681714137677, 423.8512808919341, -3292.954617172262, 14612.836519174467, -38335.77551001577, 60233.56830505333, -55561.41625389907, 27712.030408856066, -5764.798703635018],
];
