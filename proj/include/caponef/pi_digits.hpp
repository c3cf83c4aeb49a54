#pragma once

#include <cstddef>
#include <string_view>

namespace caponef {

// Decimal digits of pi starting with the integer part: 3, 1, 4, 1, 5, ...
// 8192 digits, generated with mpmath at 8300 significant digits.
inline constexpr std::string_view kPiDigits =
    "3141592653589793238462643383279502884197169399375105820974944592"
    "3078164062862089986280348253421170679821480865132823066470938446"
    "0955058223172535940812848111745028410270193852110555964462294895"
    "4930381964428810975665933446128475648233786783165271201909145648"
    "5669234603486104543266482133936072602491412737245870066063155881"
    "7488152092096282925409171536436789259036001133053054882046652138"
    "4146951941511609433057270365759591953092186117381932611793105118"
    "5480744623799627495673518857527248912279381830119491298336733624"
    "4065664308602139494639522473719070217986094370277053921717629317"
    "6752384674818467669405132000568127145263560827785771342757789609"
    "1736371787214684409012249534301465495853710507922796892589235420"
    "1995611212902196086403441815981362977477130996051870721134999999"
    "8372978049951059731732816096318595024459455346908302642522308253"
    "3446850352619311881710100031378387528865875332083814206171776691"
    "4730359825349042875546873115956286388235378759375195778185778053"
    "2171226806613001927876611195909216420198938095257201065485863278"
    "8659361533818279682303019520353018529689957736225994138912497217"
    "7528347913151557485724245415069595082953311686172785588907509838"
    "1754637464939319255060400927701671139009848824012858361603563707"
    "6601047101819429555961989467678374494482553797747268471040475346"
    "4620804668425906949129331367702898915210475216205696602405803815"
    "0193511253382430035587640247496473263914199272604269922796782354"
    "7816360093417216412199245863150302861829745557067498385054945885"
    "8692699569092721079750930295532116534498720275596023648066549911"
    "9881834797753566369807426542527862551818417574672890977772793800"
    "0816470600161452491921732172147723501414419735685481613611573525"
    "5213347574184946843852332390739414333454776241686251898356948556"
    "2099219222184272550254256887671790494601653466804988627232791786"
    "0857843838279679766814541009538837863609506800642251252051173929"
    "8489608412848862694560424196528502221066118630674427862203919494"
    "5047123713786960956364371917287467764657573962413890865832645995"
    "8133904780275900994657640789512694683983525957098258226205224894"
    "0772671947826848260147699090264013639443745530506820349625245174"
    "9399651431429809190659250937221696461515709858387410597885959772"
    "9754989301617539284681382686838689427741559918559252459539594310"
    "4997252468084598727364469584865383673622262609912460805124388439"
    "0451244136549762780797715691435997700129616089441694868555848406"
    "3534220722258284886481584560285060168427394522674676788952521385"
    "2254995466672782398645659611635488623057745649803559363456817432"
    "4112515076069479451096596094025228879710893145669136867228748940"
    "5601015033086179286809208747609178249385890097149096759852613655"
    "4978189312978482168299894872265880485756401427047755513237964145"
    "1523746234364542858444795265867821051141354735739523113427166102"
    "1359695362314429524849371871101457654035902799344037420073105785"
    "3906219838744780847848968332144571386875194350643021845319104848"
    "1005370614680674919278191197939952061419663428754440643745123718"
    "1921799983910159195618146751426912397489409071864942319615679452"
    "0809514655022523160388193014209376213785595663893778708303906979"
    "2077346722182562599661501421503068038447734549202605414665925201"
    "4974428507325186660021324340881907104863317346496514539057962685"
    "6100550810665879699816357473638405257145910289706414011097120628"
    "0439039759515677157700420337869936007230558763176359421873125147"
    "1205329281918261861258673215791984148488291644706095752706957220"
    "9175671167229109816909152801735067127485832228718352093539657251"
    "2108357915136988209144421006751033467110314126711136990865851639"
    "8315019701651511685171437657618351556508849099898599823873455283"
    "3163550764791853589322618548963213293308985706420467525907091548"
    "1416549859461637180270981994309924488957571282890592323326097299"
    "7120844335732654893823911932597463667305836041428138830320382490"
    "3758985243744170291327656180937734440307074692112019130203303801"
    "9762110110044929321516084244485963766983895228684783123552658213"
    "1449576857262433441893039686426243410773226978028073189154411010"
    "4468232527162010526522721116603966655730925471105578537634668206"
    "5310989652691862056476931257058635662018558100729360659876486117"
    "9104533488503461136576867532494416680396265797877185560845529654"
    "1266540853061434443185867697514566140680070023787765913440171274"
    "9470420562230538994561314071127000407854733269939081454664645880"
    "7972708266830634328587856983052358089330657574067954571637752542"
    "0211495576158140025012622859413021647155097925923099079654737612"
    "5517656751357517829666454779174501129961489030463994713296210734"
    "0437518957359614589019389713111790429782856475032031986915140287"
    "0808599048010941214722131794764777262241425485454033215718530614"
    "2288137585043063321751829798662237172159160771669254748738986654"
    "9494501146540628433663937900397692656721463853067360965712091807"
    "6383271664162748888007869256029022847210403172118608204190004229"
    "6617119637792133757511495950156604963186294726547364252308177036"
    "7515906735023507283540567040386743513622224771589150495309844489"
    "3330963408780769325993978054193414473774418426312986080998886874"
    "1326047215695162396586457302163159819319516735381297416772947867"
    "2422924654366800980676928238280689964004824354037014163149658979"
    "4092432378969070697794223625082216889573837986230015937764716512"
    "2893578601588161755782973523344604281512627203734314653197777416"
    "0319906655418763979293344195215413418994854447345673831624993419"
    "1318148092777710386387734317720754565453220777092120190516609628"
    "0490926360197598828161332316663652861932668633606273567630354477"
    "6280350450777235547105859548702790814356240145171806246436267945"
    "6127531813407833033625423278394497538243720583531147711992606381"
    "3346776879695970309833913077109870408591337464144282277263465947"
    "0474587847787201927715280731767907707157213444730605700733492436"
    "9311383504931631284042512192565179806941135280131470130478164378"
    "8518529092854520116583934196562134914341595625865865570552690496"
    "5209858033850722426482939728584783163057777560688876446248246857"
    "9260395352773480304802900587607582510474709164396136267604492562"
    "7420420832085661190625454337213153595845068772460290161876679524"
    "0616342522577195429162991930645537799140373404328752628889639958"
    "7947572917464263574552540790914513571113694109119393251910760208"
    "2520261879853188770584297259167781314969900901921169717372784768"
    "4726860849003377024242916513005005168323364350389517029893922334"
    "5172201381280696501178440874519601212285993716231301711444846409"
    "0389064495444006198690754851602632750529834918740786680881833851"
    "0228334508504860825039302133219715518430635455007668282949304137"
    "7655279397517546139539846833936383047461199665385815384205685338"
    "6218672523340283087112328278921250771262946322956398989893582116"
    "7456270102183564622013496715188190973038119800497340723961036854"
    "0664319395097901906996395524530054505806855019567302292191393391"
    "8568034490398205955100226353536192041994745538593810234395544959"
    "7783779023742161727111723643435439478221818528624085140066604433"
    "2588856986705431547069657474585503323233421073015459405165537906"
    "8662733379958511562578432298827372319898757141595781119635833005"
    "9408730681216028764962867446047746491599505497374256269010490377"
    "8198683593814657412680492564879855614537234786733039046883834363"
    "4655379498641927056387293174872332083760112302991136793862708943"
    "8799362016295154133714248928307220126901475466847653576164773794"
    "6752004907571555278196536213239264061601363581559074220202031872"
    "7760527721900556148425551879253034351398442532234157623361064250"
    "6390497500865627109535919465897514131034822769306247435363256916"
    "0781547818115284366795706110861533150445212747392454494542368288"
    "6061340841486377670096120715124914043027253860764823634143346235"
    "1897576645216413767969031495019108575984423919862916421939949072"
    "3623464684411739403265918404437805133389452574239950829659122850"
    "8555821572503107125701266830240292952522011872676756220415420516"
    "1841634847565169998116141010029960783869092916030288400269104140"
    "7928862150784245167090870006992821206604183718065355672525325675"
    "3286129104248776182582976515795984703562226293486003415872298053"
    "4989650226291748788202734209222245339856264766914905562842503912"
    "7577102840279980663658254889264880254566101729670266407655904290"
    "9945681506526530537182941270336931378517860904070866711496558343"
    "4347693385781711386455873678123014587687126603489139095620099393";

static_assert(kPiDigits.size() == 8192);

}  // namespace caponef
