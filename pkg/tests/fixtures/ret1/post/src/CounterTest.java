public class CounterTest {
    private Counter mCounter = new Counter();

    public void testGetStats() {
        mCounter.add(5);
        Stats stats = mCounter.getStats();
        assertEquals(5, stats.total());
    }
}
