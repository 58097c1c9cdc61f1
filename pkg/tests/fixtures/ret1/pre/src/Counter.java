public class Counter {
    private int mCount;

    public void add(int value) {
        mCount = mCount + value;
    }

    public Stats getStats() {
        return new Stats(mCount);
    }
}
